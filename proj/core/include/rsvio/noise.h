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

// First-order propagation of image-point noise to the row triplets of B.
//
// For pair alpha = (a, b) and row s the Jacobian of b_alpha^(s) w.r.t. an
// image point factors as J4 * J3 * J2 * J1: pixel -> normalized camera ray,
// rotation into the origin frame, normalization by the third coordinate, and
// the derivative of the depth elimination w.r.t. the two free ray components.
// With NoiseScope::kTrack the Jacobian spans every observation of the pair's
// track, the pair's own two first. All covariances here are normalized
// (sigma factored out).

#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "rsvio/system.h"

namespace rsvio {

/// Which image points enter the covariance of a pair's row triplet. kPair
/// uses only the pair's own two observations. kTrack uses every observation
/// of the track, since eliminating the depths of a track couples all of its
/// row triplets.
enum class NoiseScope { kPair, kTrack };

struct PointNoiseModel {
  /// Default normalized covariance of every image point (pixels^2).
  Eigen::Matrix2d V0_u = Eigen::Matrix2d::Identity();
  /// Optional per-observation override, indexed like the observations.
  std::vector<Eigen::Matrix2d> per_observation;
  /// Noise level in pixels; not used by the propagation itself.
  double sigma = 0.0;
  NoiseScope scope = NoiseScope::kTrack;

  const Eigen::Matrix2d& covariance(int observation) const {
    return per_observation.empty()
               ? V0_u
               : per_observation[static_cast<std::size_t>(observation)];
  }
};

/// Per-observation factors of d p_(1:2) / d u_(1:2).
struct RayJacobian {
  Eigen::Matrix2d J1;              // K^-1 restricted to the pixel coordinates
  Eigen::Matrix<double, 3, 2> J2;  // first two columns of R_i R_c
  Eigen::Matrix<double, 2, 3> J3;  // (1 / p~_z) [I_2 | -p_(1:2)]

  Eigen::Matrix2d composite() const { return J3 * J2 * J1; }
};

RayJacobian jacobian_ray(const Observation& obs, const RigCalibration& calib,
                         const Eigen::Matrix3d& R_i0);

/// Composite d p_(1:2) / d u_(1:2) of a stored observation.
Eigen::Matrix2d ray_pixel_jacobian(const CorrespondenceSet& corrs,
                                   int observation);

enum class RayComponent { kFirstX = 0, kFirstY = 1, kSecondX = 2, kSecondY = 3 };

/// d b_alpha^(s) / d(component), rows s = 0..2 (3 x C). Only the columns of
/// P that belong to the observation move, so the derivative of G reduces to
/// two rank-one terms per observation.
Eigen::MatrixXd jacobian_schur(const ReducedSystem& reduced, int pair,
                               RayComponent component);

/// Everything the estimators need about the noise of one pair.
struct PairCovariance {
  /// J^(s) for s = 0..2, C x 2K each: two pixel columns per entry of
  /// `observations` (u_a, u_b first).
  std::array<Eigen::MatrixXd, 3> J;
  /// Block diagonal of the V0[u] of `observations` (2K x 2K).
  Eigen::MatrixXd V0_u = Eigen::MatrixXd::Identity(4, 4);
  /// Global observation indices the columns of J refer to.
  std::vector<int> observations;

  /// V0^(st)[b_alpha] = J^(s) V0_u J^(t)^T.
  Eigen::MatrixXd V0(int s, int t) const;
  /// The 3 x 3 matrix of (y, V0^(st) y).
  Eigen::Matrix3d quadratic(const Eigen::VectorXd& y) const;
};

struct RowCovariances {
  std::vector<PairCovariance> pairs;
  int cols = 7;
};

/// Propagates the normalized point covariances to every pair.
RowCovariances propagate(const ReducedSystem& reduced,
                         const PointNoiseModel& noise);

/// The nine matrices of a single pair, row-major in (s, t).
std::array<Eigen::MatrixXd, 9> propagate(const ReducedSystem& reduced,
                                         const PointNoiseModel& noise,
                                         int pair);

}  // namespace rsvio
