// Copyright 2026 The rsvio Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rsvio/so3.h"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "rsvio/error.h"

namespace rsvio {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kOutOfRange: return "out of range";
    case ErrorCode::kDegenerateRay: return "degenerate ray";
    case ErrorCode::kDegeneratePair: return "degenerate pair";
    case ErrorCode::kInsufficientData: return "insufficient data";
    case ErrorCode::kDegenerateTrack: return "degenerate track";
    case ErrorCode::kRankDeficient: return "rank deficient";
    case ErrorCode::kSolutionAtInfinity: return "solution at infinity";
    case ErrorCode::kNotPositiveDefinite: return "not positive definite";
    case ErrorCode::kCheirality: return "cheirality violation";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown";
}

namespace so3 {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d exp(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d K = skew(phi);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + K + 0.5 * K * K;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * K + b * K * K;
}

Eigen::Vector3d log(const Eigen::Matrix3d& R) {
  const double c = 0.5 * (R.trace() - 1.0);
  const Eigen::Vector3d w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0),
                          R(1, 0) - R(0, 1));
  // |w| = 2 sin(theta); atan2 keeps full precision near 0 and pi.
  const double theta = std::atan2(0.5 * w.norm(), c);
  if (theta < kSmallAngle) return 0.5 * w;
  if (M_PI - theta < 1e-6) {
    // Near pi the antisymmetric part vanishes; the symmetric part is
    // cos(theta) I + (1 - cos(theta)) n n^T.
    const Eigen::Matrix3d S = 0.5 * (R + R.transpose());
    const Eigen::Matrix3d A =
        (S - c * Eigen::Matrix3d::Identity()) / (1.0 - c);
    int k = 0;
    A.diagonal().maxCoeff(&k);
    Eigen::Vector3d axis = A.col(k).normalized();
    if (axis.dot(w) < 0.0) axis = -axis;
    return theta * axis;
  }
  return theta / (2.0 * std::sin(theta)) * w;
}

Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d K = skew(phi);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() - 0.5 * K + K * K / 6.0;
  }
  const double t2 = theta * theta;
  return Eigen::Matrix3d::Identity() - (1.0 - std::cos(theta)) / t2 * K +
         (theta - std::sin(theta)) / (t2 * theta) * K * K;
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& M) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    D(2, 2) = -1.0;
  }
  return svd.matrixU() * D * svd.matrixV().transpose();
}

Eigen::Matrix3d slerp(const Eigen::Matrix3d& R0, const Eigen::Matrix3d& R1,
                      double s) {
  return R0 * exp(s * log(R0.transpose() * R1));
}

bool is_rotation(const Eigen::Matrix3d& R, double tol) {
  return (R.transpose() * R - Eigen::Matrix3d::Identity()).norm() < tol &&
         std::abs(R.determinant() - 1.0) < tol;
}

}  // namespace so3
}  // namespace rsvio
