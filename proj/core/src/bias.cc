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

#include "rsvio/bias.h"

#include <cmath>
#include <sstream>

#include <Eigen/LU>

#include "rsvio/error.h"
#include "rsvio/so3.h"

namespace rsvio {
namespace {

/// d N(p~) / d p~ for normalization by the third coordinate.
Eigen::Matrix3d normalization_jacobian(const Eigen::Vector3d& p) {
  Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
  const double z = p.z();
  J(0, 0) = J(1, 1) = 1.0 / z;
  J(0, 2) = -p.x() / (z * z);
  J(1, 2) = -p.y() / (z * z);
  return J;
}

/// Directional derivative of normalization_jacobian(p) along d.
Eigen::Matrix3d normalization_jacobian_derivative(const Eigen::Vector3d& p,
                                                  const Eigen::Vector3d& d) {
  Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
  const double z = p.z();
  const double z2 = z * z;
  J(0, 0) = J(1, 1) = -d.z() / z2;
  J(0, 2) = -d.x() / z2 + 2.0 * p.x() * d.z() / (z2 * z);
  J(1, 2) = -d.y() / z2 + 2.0 * p.y() * d.z() / (z2 * z);
  return J;
}

}  // namespace

Eigen::Matrix3d accel_bias_columns(const ScanlineIntegrator& integrator,
                                   std::int64_t i, std::int64_t j) {
  return integrator.accel_bias_coefficient(i) -
         integrator.accel_bias_coefficient(j);
}

GyroBiasJacobians gyro_bias_jacobians(const Geometry& geometry,
                                      const Observation& obs) {
  const ScanlineIntegrator& integ = *geometry.integrator;
  if (!integ.options().gyro_bias_jacobians) {
    throw Error(ErrorCode::kInvalidArgument,
                "integrator was built without gyro-bias Jacobians");
  }
  const Observation o = obs.scanline >= 0 ? obs : geometry.locate(obs);
  const CameraModel& cam = geometry.calib.camera(o.cam_id);
  const Eigen::Matrix3d R = geometry.rotation(o.scanline);
  const Eigen::Matrix3d JR = integ.rotation_gyro_jacobian(o.scanline);
  const Eigen::Matrix3d Kinv = cam.K.inverse();
  const Eigen::Vector3d w = cam.R_cam_imu * Kinv * o.u;
  const Eigen::Vector3d p = R * w;
  if (std::abs(p.z()) <= kMinRayDepth * p.norm()) {
    throw Error(ErrorCode::kDegenerateRay,
                "ray parallel to the normalization plane");
  }

  GyroBiasJacobians out;
  out.dR = JR;
  out.dkappa = -R * so3::skew(cam.t_cam_imu) * JR +
               integ.accel_displacement_gyro_jacobian(o.scanline);
  const Eigen::Matrix3d JN = normalization_jacobian(p);
  const Eigen::Matrix3d dp_raw = -R * so3::skew(w) * JR;
  out.dray = JN * dp_raw;
  for (int c = 0; c < 2; ++c) {
    const Eigen::Vector3d dw = cam.R_cam_imu * Kinv.col(c);
    const Eigen::Vector3d dp = R * dw;
    out.dray_du[static_cast<std::size_t>(c)] =
        normalization_jacobian_derivative(p, dp) * dp_raw -
        JN * R * so3::skew(dw) * JR;
  }
  return out;
}

FullSystem assemble_with_bias(const CorrespondenceSet& corrs,
                              const Geometry& geometry, const BiasConfig& cfg) {
  FullSystem base = assemble(corrs, geometry);
  if (!cfg.model_accel && !cfg.model_gyro) return base;

  ColumnLayout layout;
  layout.accel_bias = cfg.model_accel;
  layout.gyro_bias = cfg.model_gyro;
  const int n = corrs.pair_count();
  const int m = corrs.observation_count();
  if (3 * n - m < layout.params()) {
    std::ostringstream os;
    os << "need more correspondences: " << 3 * n - m << " constraints for "
       << layout.params() << " unknowns";
    throw Error(ErrorCode::kInsufficientData, os.str());
  }

  const Eigen::MatrixXd& S0 = base.S();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(S0.rows(), layout.cols());
  S.leftCols<6>() = S0.leftCols<6>();
  S.col(layout.homogeneous()) = S0.col(6);

  if (cfg.model_accel) {
    for (int r = 0; r < n; ++r) {
      const Correspondence& c = corrs.pairs[r];
      S.block<3, 3>(3 * r, layout.accel_offset()) = accel_bias_columns(
          *geometry.integrator, corrs.observations[c.a].scanline,
          corrs.observations[c.b].scanline);
    }
  }

  std::optional<GyroColumnModel> gyro;
  if (cfg.model_gyro) {
    // The columns multiply lambda by dp/de_w; the depths are taken from a
    // bias-free solve, which keeps the system linear in e_w.
    const ReducedSystem reduced = reduce(base);
    const Eigen::VectorXd y = solve_reduced_affine(reduced.B());
    GyroColumnModel model;
    model.depth_prior = recover_depths(base, y).lambda;
    model.dray_gyro_du.resize(static_cast<std::size_t>(m));
    std::vector<GyroBiasJacobians> jac;
    jac.reserve(static_cast<std::size_t>(m));
    for (int o = 0; o < m; ++o) {
      jac.push_back(gyro_bias_jacobians(geometry, corrs.observations[o]));
      model.dray_gyro_du[static_cast<std::size_t>(o)] = jac.back().dray_du;
    }
    for (int r = 0; r < n; ++r) {
      const Correspondence& c = corrs.pairs[r];
      const auto& ja = jac[static_cast<std::size_t>(c.a)];
      const auto& jb = jac[static_cast<std::size_t>(c.b)];
      S.block<3, 3>(3 * r, layout.gyro_offset()) =
          ja.dkappa - jb.dkappa + model.depth_prior(c.a) * ja.dray -
          model.depth_prior(c.b) * jb.dray;
    }
    gyro = std::move(model);
  }
  return FullSystem(base.correspondences_ptr(), std::move(S), layout,
                    base.blocks(), std::move(gyro));
}

}  // namespace rsvio
