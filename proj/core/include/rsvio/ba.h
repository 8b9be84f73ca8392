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

// Reprojection-error refinement of (v0, g0) and the 3D points.
//
// Every observation is projected through the pose of its own scanline; the
// position is affine in (v0, g0), so the state Jacobian is exact. Points are
// eliminated with a Schur complement in each Levenberg-Marquardt step.

#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "rsvio/estimators.h"
#include "rsvio/system.h"

namespace rsvio {

struct BaOptions {
  double initial_damping = 1e-4;
  double damping_factor = 10.0;
  double max_damping = 1e8;
  double relative_tolerance = 1e-10;
  int max_iterations = 50;
};

struct BaProblem {
  std::shared_ptr<const FullSystem> full;
  Geometry geometry;
  /// Observation indices (into the correspondence set) used as residuals.
  std::vector<int> observations;
  /// Point index per used observation.
  std::vector<int> point_of;
  /// Track id per point.
  std::vector<int> track_of_point;
  /// Initial points; filled by init_points when empty.
  std::vector<Eigen::Vector3d> points;
};

BaProblem make_ba_problem(std::shared_ptr<const FullSystem> full,
                          const Geometry& geometry);

/// Per track, the mean of lambda p + t_i + R_i t_c over its observations,
/// with depths from recover_depths. Throws Error(kCheirality) when every
/// depth of a track is non-positive.
std::vector<Eigen::Vector3d> init_points(const BaProblem& problem,
                                         const Eigen::Vector3d& v0,
                                         const Eigen::Vector3d& g0);

struct Projection {
  Eigen::Vector2d u;
  Eigen::Matrix<double, 2, 6> d_state;  // w.r.t. [v0; g0]
  Eigen::Matrix<double, 2, 3> d_point;
};

/// Predicted pixel of X seen in obs. Throws Error(kCheirality) for points
/// behind the camera.
Eigen::Vector2d reproject(const Eigen::Vector3d& X, const Eigen::Vector3d& v0,
                          const Eigen::Vector3d& g0, const Observation& obs,
                          const Geometry& geometry);
Projection reproject_with_jacobians(const Eigen::Vector3d& X,
                                    const Eigen::Vector3d& v0,
                                    const Eigen::Vector3d& g0,
                                    const Observation& obs,
                                    const Geometry& geometry);

struct BaTraceEntry {
  int iteration = 0;
  double cost = 0.0;
  double damping = 0.0;
  bool accepted = false;
};

struct BaResult {
  InitEstimate estimate;
  std::vector<Eigen::Vector3d> points;
  std::vector<BaTraceEntry> trace;
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

/// Levenberg-Marquardt from init. The returned covariance is
/// sigma_hat^2 times the inverse of the point-marginalized Hessian.
BaResult refine_lm(const BaProblem& problem, const InitEstimate& init,
                   const BaOptions& opts = {});

}  // namespace rsvio
