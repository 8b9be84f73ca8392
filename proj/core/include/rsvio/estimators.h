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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "rsvio/noise.h"
#include "rsvio/system.h"

namespace rsvio {

enum class Method { kLs, kIterReweight, kTaubin, kRenorm, kBa };

const char* to_string(Method method);
/// Accepts ls, iter-reweight (or irw), taubin, renorm, ba.
Method parse_method(std::string_view name);

struct InitEstimate {
  Method method = Method::kLs;
  Eigen::Vector3d v0 = Eigen::Vector3d::Zero();
  Eigen::Vector3d g0 = Eigen::Vector3d::Zero();
  std::optional<Eigen::Vector3d> accel_bias;
  std::optional<Eigen::Vector3d> gyro_bias;
  /// Unit-norm homogeneous solution, sign chosen so that the last entry > 0.
  Eigen::VectorXd y;
  /// Covariance of all parameters [v0; g0; biases] (empty when unavailable)
  /// and the same matrix for sigma = 1.
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cov_unit;
  double sigma_hat = 0.0;
  int iterations = 1;
  bool converged = true;

  bool has_covariance() const { return cov.size() > 0; }
  /// Parameters in column order.
  Eigen::VectorXd params() const;
};

struct Dehomogenized {
  Eigen::VectorXd x;    // y(0:C-2) / y(C-1)
  Eigen::MatrixXd J_H;  // d x / d y, (C-1) x C
};

/// Throws Error(kSolutionAtInfinity) when |y_last| <= 1e-12 |y|.
Dehomogenized dehomogenize(const Eigen::VectorXd& y);

/// Fills v0, g0, biases and y of an estimate from a homogeneous vector.
void set_solution(InitEstimate& est, const Eigen::VectorXd& y,
                  const ColumnLayout& layout);

struct WeightMatrix {
  Eigen::Matrix3d W = Eigen::Matrix3d::Identity();
  int rank_used = 3;
};

/// Rank-truncated pseudoinverse of a 3x3 PSD matrix: rank 2 iff
/// sigma_2 / sigma_1 > rank_ratio, rank 1 otherwise.
WeightMatrix truncated_pinv(const Eigen::Matrix3d& V, double rank_ratio);

/// How the parameter covariance treats image points shared between pairs.
/// kIndependentPairs is (1/N) J_H M^+ J_H^T, exact when no two pairs share
/// an observation. kSharedPoints propagates every image point once through
/// the weighted normal equations (sandwich form) and reduces to the former
/// when pairs are disjoint.
enum class CovarianceModel { kIndependentPairs, kSharedPoints };

struct RenormOptions {
  double rank_ratio = 0.1;
  double tolerance = 1e-8;
  int max_iterations = 30;
  /// Relative cutoff of the pseudoinverse in the covariance formula.
  double pinv_cutoff = 1e-12;
  CovarianceModel covariance = CovarianceModel::kSharedPoints;
};

/// Smallest-|gamma| solution of M y = gamma N y, unit norm.
Eigen::VectorXd solve_gep(const Eigen::MatrixXd& M, const Eigen::MatrixXd& N);

/// (1/N) sum_alpha B_alpha^T W_alpha B_alpha with B_alpha the row triplet.
Eigen::MatrixXd moment_matrix(const Eigen::MatrixXd& B,
                              const std::vector<WeightMatrix>* weights);
/// (1/N) sum_alpha sum_st W^(st) V0^(st)[b_alpha].
Eigen::MatrixXd noise_matrix(const RowCovariances& covs,
                             const std::vector<WeightMatrix>* weights);

InitEstimate solve_ls(const Eigen::MatrixXd& B, const ColumnLayout& layout = {});
InitEstimate solve_taubin(const Eigen::MatrixXd& B, const RowCovariances& covs,
                          const ColumnLayout& layout = {});
InitEstimate solve_iter_reweight(const Eigen::MatrixXd& B,
                                 const RowCovariances& covs,
                                 const ColumnLayout& layout = {},
                                 const RenormOptions& opts = {});
InitEstimate solve_renorm(const Eigen::MatrixXd& B, const RowCovariances& covs,
                          const ColumnLayout& layout = {},
                          const RenormOptions& opts = {});

/// sigma_hat^2 = y^T M y / (2 - p / N) for unit y and weighted M, p the
/// number of parameters (6 without biases).
double estimate_sigma_squared(const Eigen::MatrixXd& M,
                              const Eigen::VectorXd& y, int pairs,
                              int params = 6);

/// (1/N) J_H (P_y M P_y)^+ J_H^T, the parameter covariance for sigma = 1.
Eigen::MatrixXd unit_covariance(const Eigen::MatrixXd& M,
                                const Eigen::VectorXd& y, int pairs,
                                double pinv_cutoff = 1e-12);

/// Covariance for sigma = 1 of the weighted fit with fixed weights, summing
/// the contribution of every image point over all pairs that use it.
Eigen::MatrixXd shared_unit_covariance(const Eigen::MatrixXd& B,
                                       const RowCovariances& covs,
                                       const std::vector<WeightMatrix>& weights,
                                       const Eigen::VectorXd& y,
                                       double pinv_cutoff = 1e-12);

}  // namespace rsvio
