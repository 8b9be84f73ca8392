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

#include "rsvio/estimators.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "rsvio/error.h"

namespace rsvio {
namespace {

constexpr double kInfinityTolerance = 1e-12;
// y^T M y below this fraction of the largest eigenvalue counts as an exact
// fit; eigen solvers resolve the smallest eigenvalue only to ~1e-16 lambda_max.
constexpr double kExactFitRatio = 1e-14;

Eigen::VectorXd canonical_sign(Eigen::VectorXd y) {
  y.normalize();
  if (y(y.size() - 1) < 0.0) y = -y;
  return y;
}

void check_rows(const Eigen::MatrixXd& B) {
  if (B.rows() % 3 != 0 || B.rows() == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "B must consist of row triplets, got " +
                    std::to_string(B.rows()) + " rows");
  }
  if (B.rows() < B.cols() - 1) {
    throw Error(ErrorCode::kRankDeficient,
                "too few rows for " + std::to_string(B.cols() - 1) +
                    " parameters");
  }
}

void check_covs(const Eigen::MatrixXd& B, const RowCovariances& covs) {
  check_rows(B);
  if (static_cast<Eigen::Index>(covs.pairs.size()) * 3 != B.rows()) {
    throw Error(ErrorCode::kInvalidArgument,
                "row covariances do not match B");
  }
}

/// Rank check shared by all estimators: the second-smallest singular value
/// must be distinguishable from zero.
void check_rank(const Eigen::VectorXd& singular_values, Eigen::Index params) {
  const double largest = singular_values(0);
  const double second_smallest = singular_values(params - 1);
  if (!(second_smallest > 1e-12 * largest)) {
    throw Error(ErrorCode::kRankDeficient,
                "reduced system rank is below " + std::to_string(params));
  }
}

bool positive_definite(const Eigen::MatrixXd& A) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = Eigen::MatrixXd(llt.matrixL()).diagonal();
  return d.minCoeff() > 1e-10 * d.maxCoeff();
}

struct IterationState {
  Eigen::VectorXd y;
  Eigen::MatrixXd M;
  std::vector<WeightMatrix> weights;
  double cost = std::numeric_limits<double>::infinity();
};

enum class Scheme { kRenorm, kIterReweight };

InitEstimate iterate(const Eigen::MatrixXd& B, const RowCovariances& covs,
                     const ColumnLayout& layout, const RenormOptions& opts,
                     Scheme scheme) {
  check_covs(B, covs);
  const auto n_pairs = static_cast<int>(covs.pairs.size());

  std::vector<WeightMatrix> weights(covs.pairs.size());
  IterationState best;
  Eigen::VectorXd y_prev;
  InitEstimate est;
  est.method = scheme == Scheme::kRenorm ? Method::kRenorm
                                         : Method::kIterReweight;
  est.converged = false;

  int it = 1;
  for (; it <= opts.max_iterations; ++it) {
    const Eigen::MatrixXd M = moment_matrix(B, &weights);
    Eigen::VectorXd y;
    if (scheme == Scheme::kRenorm) {
      y = solve_gep(M, noise_matrix(covs, &weights));
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
      y = eig.eigenvectors().col(0);
    }
    y = canonical_sign(y);
    const double cost = y.dot(M * y);
    if (cost < best.cost) best = {y, M, weights, cost};

    if (it == 1) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M,
                                                         Eigen::EigenvaluesOnly);
      if (cost <= kExactFitRatio * eig.eigenvalues().maxCoeff()) {
        est.converged = true;
        best = {y, M, weights, cost};
        break;
      }
    }
    if (y_prev.size() > 0 && (y - y_prev).cwiseAbs().maxCoeff() < opts.tolerance) {
      est.converged = true;
      best = {y, M, weights, cost};
      break;
    }
    y_prev = y;
    for (std::size_t a = 0; a < covs.pairs.size(); ++a) {
      weights[a] = truncated_pinv(covs.pairs[a].quadratic(y), opts.rank_ratio);
    }
  }
  est.iterations = std::min(it, opts.max_iterations);
  set_solution(est, best.y, layout);

  if (scheme == Scheme::kRenorm) {
    // Each pair contributes rank(W_alpha) degrees of freedom; with rank-2
    // weights everywhere this is the usual 2 - 6 / N normalization.
    int rank_sum = 0;
    for (const WeightMatrix& w : best.weights) rank_sum += w.rank_used;
    const int dof = rank_sum - layout.params();
    if (est.iterations > 1 && dof > 0) {
      est.sigma_hat = std::sqrt(std::max(0.0, best.cost * n_pairs / dof));
    } else {
      est.sigma_hat = std::sqrt(std::max(
          0.0, estimate_sigma_squared(best.M, best.y, n_pairs, layout.params())));
    }
    est.cov_unit =
        opts.covariance == CovarianceModel::kSharedPoints
            ? shared_unit_covariance(B, covs, best.weights, best.y,
                                     opts.pinv_cutoff)
            : unit_covariance(best.M, best.y, n_pairs, opts.pinv_cutoff);
    est.cov = est.sigma_hat * est.sigma_hat * est.cov_unit;
  }
  return est;
}

}  // namespace

const char* to_string(Method method) {
  switch (method) {
    case Method::kLs: return "ls";
    case Method::kIterReweight: return "iter-reweight";
    case Method::kTaubin: return "taubin";
    case Method::kRenorm: return "renorm";
    case Method::kBa: return "ba";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "ls") return Method::kLs;
  if (name == "iter-reweight" || name == "irw") return Method::kIterReweight;
  if (name == "taubin") return Method::kTaubin;
  if (name == "renorm") return Method::kRenorm;
  if (name == "ba") return Method::kBa;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown method '" + std::string(name) + "'");
}

Eigen::VectorXd InitEstimate::params() const {
  const Eigen::Index n = 6 + (accel_bias ? 3 : 0) + (gyro_bias ? 3 : 0);
  Eigen::VectorXd x(n);
  x << v0, g0, Eigen::VectorXd::Zero(n - 6);
  Eigen::Index k = 6;
  if (accel_bias) {
    x.segment<3>(k) = *accel_bias;
    k += 3;
  }
  if (gyro_bias) x.segment<3>(k) = *gyro_bias;
  return x;
}

Dehomogenized dehomogenize(const Eigen::VectorXd& y) {
  const auto c = y.size();
  if (c < 2) throw Error(ErrorCode::kInvalidArgument, "vector too short");
  const double last = y(c - 1);
  if (!(std::abs(last) > kInfinityTolerance * y.norm())) {
    throw Error(ErrorCode::kSolutionAtInfinity,
                "homogeneous coordinate vanishes; solution at infinity");
  }
  Dehomogenized out;
  out.x = y.head(c - 1) / last;
  out.J_H.resize(c - 1, c);
  out.J_H.leftCols(c - 1) =
      Eigen::MatrixXd::Identity(c - 1, c - 1) * (1.0 / last);
  out.J_H.col(c - 1) = -y.head(c - 1) / (last * last);
  return out;
}

void set_solution(InitEstimate& est, const Eigen::VectorXd& y,
                  const ColumnLayout& layout) {
  if (y.size() != layout.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "solution size mismatch");
  }
  est.y = canonical_sign(y);
  const Eigen::VectorXd x = dehomogenize(est.y).x;
  est.v0 = x.segment<3>(0);
  est.g0 = x.segment<3>(3);
  est.accel_bias.reset();
  est.gyro_bias.reset();
  if (layout.accel_bias) est.accel_bias = x.segment<3>(layout.accel_offset());
  if (layout.gyro_bias) est.gyro_bias = x.segment<3>(layout.gyro_offset());
}

WeightMatrix truncated_pinv(const Eigen::Matrix3d& V, double rank_ratio) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(V);
  // Ascending order: e(2) is the largest.
  const Eigen::Vector3d e = eig.eigenvalues();
  WeightMatrix w;
  if (!(e(2) > 0.0)) {
    w.W.setZero();
    w.rank_used = 1;
    return w;
  }
  w.rank_used = e(1) / e(2) > rank_ratio ? 2 : 1;
  w.W.setZero();
  for (int k = 0; k < w.rank_used; ++k) {
    const Eigen::Vector3d v = eig.eigenvectors().col(2 - k);
    w.W += v * v.transpose() / e(2 - k);
  }
  return w;
}

Eigen::VectorXd solve_gep(const Eigen::MatrixXd& M, const Eigen::MatrixXd& N) {
  if (M.rows() != M.cols() || N.rows() != M.rows() || N.cols() != M.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "GEP size mismatch");
  }
  if (!M.allFinite() || !N.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "GEP input is not finite");
  }
  if (positive_definite(N)) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(M, N);
    Eigen::Index k = 0;
    ges.eigenvalues().cwiseAbs().minCoeff(&k);
    return ges.eigenvectors().col(k).normalized();
  }
  if (positive_definite(M)) {
    // N y = (1 / gamma) M y; the smallest |gamma| has the largest |1/gamma|.
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(N, M);
    Eigen::Index k = 0;
    ges.eigenvalues().cwiseAbs().maxCoeff(&k);
    return ges.eigenvectors().col(k).normalized();
  }
  Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> qz(M, N, true);
  const auto& alpha = qz.alphas();
  const auto& beta = qz.betas();
  Eigen::Index best = -1;
  double best_abs = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    if (std::abs(beta(k)) < 1e-300) continue;
    const std::complex<double> g = alpha(k) / beta(k);
    if (std::abs(g.imag()) > 1e-9 * (1.0 + std::abs(g.real()))) continue;
    if (std::abs(g) < best_abs) {
      best_abs = std::abs(g);
      best = k;
    }
  }
  if (best < 0) {
    throw Error(ErrorCode::kNotPositiveDefinite,
                "generalized eigenproblem has no finite real eigenvalue");
  }
  return qz.eigenvectors().col(best).real().normalized();
}

Eigen::MatrixXd moment_matrix(const Eigen::MatrixXd& B,
                              const std::vector<WeightMatrix>* weights) {
  check_rows(B);
  const Eigen::Index n = B.rows() / 3;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(B.cols(), B.cols());
  if (weights == nullptr) {
    M.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
  } else {
    for (Eigen::Index a = 0; a < n; ++a) {
      const auto Ba = B.middleRows<3>(3 * a);
      M.noalias() += Ba.transpose() * (*weights)[static_cast<std::size_t>(a)].W * Ba;
    }
  }
  if (weights == nullptr) {
    M = M.selfadjointView<Eigen::Lower>();
  }
  return M / static_cast<double>(n);
}

Eigen::MatrixXd noise_matrix(const RowCovariances& covs,
                             const std::vector<WeightMatrix>* weights) {
  const Eigen::Index c = covs.cols;
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(c, c);
  for (std::size_t a = 0; a < covs.pairs.size(); ++a) {
    const PairCovariance& pc = covs.pairs[a];
    const Eigen::Matrix3d W =
        weights ? (*weights)[a].W : Eigen::Matrix3d::Identity();
    const Eigen::Index k = pc.V0_u.rows();
    Eigen::MatrixXd Jcat(c, 3 * k);
    Eigen::MatrixXd K(3 * k, 3 * k);
    for (int s = 0; s < 3; ++s) {
      Jcat.middleCols(k * s, k) = pc.J[static_cast<std::size_t>(s)];
      for (int t = 0; t < 3; ++t) {
        K.block(k * s, k * t, k, k) = W(s, t) * pc.V0_u;
      }
    }
    N.noalias() += Jcat * K * Jcat.transpose();
  }
  N = 0.5 * (N + N.transpose());
  return N / static_cast<double>(covs.pairs.size());
}

InitEstimate solve_ls(const Eigen::MatrixXd& B, const ColumnLayout& layout) {
  check_rows(B);
  if (B.cols() != layout.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "B does not match the layout");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinV);
  check_rank(svd.singularValues(), layout.params());
  InitEstimate est;
  est.method = Method::kLs;
  set_solution(est, svd.matrixV().col(B.cols() - 1), layout);
  est.iterations = 1;
  est.converged = true;
  return est;
}

InitEstimate solve_taubin(const Eigen::MatrixXd& B, const RowCovariances& covs,
                          const ColumnLayout& layout) {
  check_covs(B, covs);
  const Eigen::MatrixXd M = moment_matrix(B, nullptr);
  const Eigen::MatrixXd N = noise_matrix(covs, nullptr);
  InitEstimate est;
  est.method = Method::kTaubin;
  set_solution(est, solve_gep(M, N), layout);
  est.iterations = 1;
  est.converged = true;
  return est;
}

InitEstimate solve_iter_reweight(const Eigen::MatrixXd& B,
                                 const RowCovariances& covs,
                                 const ColumnLayout& layout,
                                 const RenormOptions& opts) {
  return iterate(B, covs, layout, opts, Scheme::kIterReweight);
}

InitEstimate solve_renorm(const Eigen::MatrixXd& B, const RowCovariances& covs,
                          const ColumnLayout& layout,
                          const RenormOptions& opts) {
  return iterate(B, covs, layout, opts, Scheme::kRenorm);
}

double estimate_sigma_squared(const Eigen::MatrixXd& M,
                              const Eigen::VectorXd& y, int pairs,
                              int params) {
  const Eigen::VectorXd u = y.normalized();
  const double denom = 2.0 - static_cast<double>(params) / pairs;
  if (!(denom > 0.0)) {
    throw Error(ErrorCode::kInsufficientData,
                "too few pairs to estimate the noise level");
  }
  return u.dot(M * u) / denom;
}

namespace {

/// (P_y M P_y)^+ without the direction of y and below the cutoff.
Eigen::MatrixXd projected_pinv(const Eigen::MatrixXd& M,
                               const Eigen::VectorXd& u, double pinv_cutoff) {
  const auto c = M.rows();
  const Eigen::MatrixXd Py = Eigen::MatrixXd::Identity(c, c) - u * u.transpose();
  const Eigen::MatrixXd PMP = Py * M * Py;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (PMP + PMP.transpose()));
  const Eigen::VectorXd& e = eig.eigenvalues();
  const double largest = e.maxCoeff();
  Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(c, c);
  for (Eigen::Index k = 1; k < c; ++k) {
    if (e(k) > pinv_cutoff * largest) {
      const Eigen::VectorXd v = eig.eigenvectors().col(k);
      pinv += v * v.transpose() / e(k);
    }
  }
  return pinv;
}

}  // namespace

Eigen::MatrixXd unit_covariance(const Eigen::MatrixXd& M,
                                const Eigen::VectorXd& y, int pairs,
                                double pinv_cutoff) {
  const Eigen::VectorXd u = y.normalized();
  const Eigen::MatrixXd pinv = projected_pinv(M, u, pinv_cutoff);
  const Eigen::MatrixXd J = dehomogenize(u).J_H;
  Eigen::MatrixXd cov = J * pinv * J.transpose() / static_cast<double>(pairs);
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd shared_unit_covariance(const Eigen::MatrixXd& B,
                                       const RowCovariances& covs,
                                       const std::vector<WeightMatrix>& weights,
                                       const Eigen::VectorXd& y,
                                       double pinv_cutoff) {
  check_covs(B, covs);
  if (weights.size() != covs.pairs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one weight matrix per pair");
  }
  const Eigen::VectorXd u = y.normalized();
  const auto c = B.cols();
  const auto n = static_cast<double>(covs.pairs.size());
  const Eigen::MatrixXd M = moment_matrix(B, &weights);

  // g_o = sum over pairs of B_a^T W_a d(B_a y)/du_o, one C x 2 per image point.
  std::unordered_map<int, Eigen::MatrixXd> g;
  std::unordered_map<int, Eigen::Matrix2d> V;
  for (std::size_t a = 0; a < covs.pairs.size(); ++a) {
    const PairCovariance& pc = covs.pairs[a];
    const Eigen::MatrixXd BtW =
        B.middleRows<3>(3 * static_cast<Eigen::Index>(a)).transpose() *
        weights[a].W;
    Eigen::MatrixXd Dy(3, pc.V0_u.rows());
    for (int s = 0; s < 3; ++s) {
      Dy.row(s) = u.transpose() * pc.J[static_cast<std::size_t>(s)];
    }
    for (std::size_t j = 0; j < pc.observations.size(); ++j) {
      const int o = pc.observations[j];
      const auto col = static_cast<Eigen::Index>(2 * j);
      auto [it, fresh] = g.try_emplace(o, Eigen::MatrixXd::Zero(c, 2));
      it->second.noalias() += BtW * Dy.middleCols<2>(col);
      if (fresh) V[o] = pc.V0_u.block<2, 2>(col, col);
    }
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(c, c);
  for (const auto& [o, go] : g) meat.noalias() += go * V[o] * go.transpose();
  meat /= n * n;

  const Eigen::MatrixXd pinv = projected_pinv(M, u, pinv_cutoff);
  const Eigen::MatrixXd J = dehomogenize(u).J_H;
  Eigen::MatrixXd cov = J * pinv * meat * pinv * J.transpose();
  return 0.5 * (cov + cov.transpose());
}

}  // namespace rsvio
