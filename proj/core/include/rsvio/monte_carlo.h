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
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rsvio/estimators.h"
#include "rsvio/pipeline.h"
#include "rsvio/synth.h"
#include "rsvio/trajectory.h"

namespace rsvio {

struct MonteCarloConfig {
  TrajectorySpec trajectory;
  /// sigma_px of the scenario is ignored; the grid below is used instead.
  ScenarioConfig scenario;
  std::vector<double> sigmas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  int trials = 100;
  /// Sliding windows, one frame apart.
  int windows = 1;
  std::vector<Method> methods = {Method::kLs, Method::kRenorm, Method::kBa};
  /// Worker threads; 0 uses the available hardware concurrency.
  int jobs = 0;
  /// Solver options; pairing, camera, shutter and frames are taken from the
  /// scenario.
  PipelineOptions pipeline;
  /// Fraction of pairs to corrupt with gross outliers before solving.
  double outlier_fraction = 0.0;
};

struct TrialResult {
  double sigma = 0.0;
  int window = 0;
  int trial = 0;
  Method method = Method::kLs;
  bool ok = false;
  bool converged = false;
  std::string error;

  double eps_v = 0.0;  // m/s
  double eps_g = 0.0;  // deg
  int iterations = 0;
  double sigma_hat = 0.0;
  /// Predicted std of the velocity error norm and of the gravity angle
  /// (deg) from the estimate's covariance; 0 when it has none.
  double pred_std_v = 0.0;
  double pred_std_g = 0.0;

  Eigen::Vector3d v_error = Eigen::Vector3d::Zero();  // v0 - v0_gt
  Eigen::Vector3d g_error = Eigen::Vector3d::Zero();  // g0 - g0_gt
  /// Per-component std of [v0; g0] from the covariance scaled by the
  /// injected sigma (not sigma_hat); 0 when there is none.
  Eigen::Matrix<double, 6, 1> pred_component_std =
      Eigen::Matrix<double, 6, 1>::Zero();
};

struct Aggregate {
  double sigma = 0.0;
  Method method = Method::kLs;
  int count = 0;
  int failures = 0;
  double mean_eps_v = 0.0;
  double std_eps_v = 0.0;
  double median_eps_v = 0.0;
  double mean_eps_g = 0.0;
  double std_eps_g = 0.0;
  double median_eps_g = 0.0;
  double mean_iterations = 0.0;
  double median_iterations = 0.0;
  double median_sigma_hat = 0.0;
  double mean_pred_std_v = 0.0;
  double mean_pred_std_g = 0.0;
  /// Empirical std of each [v0; g0] error component over the trials.
  Eigen::Matrix<double, 6, 1> empirical_component_std =
      Eigen::Matrix<double, 6, 1>::Zero();
  /// Mean of the predicted per-component std.
  Eigen::Matrix<double, 6, 1> predicted_component_std =
      Eigen::Matrix<double, 6, 1>::Zero();
};

struct MonteCarloResult {
  /// Ordered by sigma, window, trial, then method as configured.
  std::vector<TrialResult> trials;
  /// Ordered by sigma, then method as configured.
  std::vector<Aggregate> aggregates;

  const Aggregate& at(double sigma, Method method) const;
};

/// Runs every (sigma, window, trial) realization with each method. Solver
/// failures are recorded per trial; scenario generation failures throw.
MonteCarloResult run_monte_carlo(const MonteCarloConfig& cfg);

/// Aggregates per (sigma, method) in first-seen order.
std::vector<Aggregate> aggregate(const std::vector<TrialResult>& trials);

}  // namespace rsvio
