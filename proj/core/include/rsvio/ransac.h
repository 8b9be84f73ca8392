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

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "rsvio/system.h"

namespace rsvio {

struct RansacOptions {
  int iterations = 200;
  /// Pairs per minimal sample, each from a different track.
  int sample_size = 6;
  /// Pixel noise assumed when normalizing residuals.
  double sigma_assumed = 0.5;
  /// Inlier threshold in units of the propagated residual std.
  double threshold = 3.0;
  /// Relative depth disagreement that removes a pair with an isolated
  /// observation.
  double depth_tolerance = 0.4;
  /// Rounds of least-squares refit on the consensus set; 0 keeps the best
  /// minimal model.
  int refit_rounds = 0;
  /// Per-pair chi-square limit, in units of the residual std, for the
  /// track-reduced residual; 0 disables track screening.
  double track_threshold = 40.0;
  std::uint64_t seed = 7;
};

/// Distance between the two rays of every pair implied by y (last entry 1),
/// divided by its first-order std for pixel noise sigma_px.
std::vector<double> pair_residuals(const FullSystem& full,
                                   const Eigen::VectorXd& y, double sigma_px);

struct RansacResult {
  CorrespondenceSet inliers;
  std::vector<int> inlier_pairs;  // indices into the input set
  Eigen::VectorXd model;          // model used for screening, last entry 1
};

/// RANSAC over minimal six-pair solves of the reduced system. Pairs are then
/// screened against the best model: negative closest-point depths fail the
/// residual test, observations failing most of their pairs are dropped, a
/// pair kept only through an observation whose other pairs all failed must
/// agree in depth with its partner's other pairs, and tracks whose reduced
/// residual is inconsistent lose observations until it is not.
/// Throws Error(kInsufficientData) below six correspondences or when no model
/// gathers six inliers.
RansacResult ransac_prune(const CorrespondenceSet& corrs,
                          const Geometry& geometry,
                          const RansacOptions& opts = {});

}  // namespace rsvio
