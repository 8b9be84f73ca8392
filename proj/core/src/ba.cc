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

#include "rsvio/ba.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "rsvio/error.h"

namespace rsvio {
namespace {

constexpr double kMinDepth = 1e-9;
constexpr double kTinyCost = 1e-24;

struct CameraPose {
  Eigen::Matrix3d R_cw;  // origin -> camera rotation
  Eigen::Vector3d t;     // IMU position
  Eigen::Matrix3d R_i;
  Eigen::Vector3d t_cam;
  double a_v = 0.0;      // d t / d v0 coefficient
  double a_g = 0.0;      // d t / d g0 coefficient
};

CameraPose camera_pose(const Observation& obs, const Geometry& geometry,
                       const Eigen::Vector3d& v0, const Eigen::Vector3d& g0) {
  const Observation o = obs.scanline >= 0 ? obs : geometry.locate(obs);
  const ScanlineIntegrator& integ = *geometry.integrator;
  const CameraModel& cam = geometry.calib.camera(o.cam_id);
  const auto fi = static_cast<double>(o.scanline);
  CameraPose p;
  p.R_i = geometry.rotation(o.scanline);
  p.t = integ.translation(o.scanline, v0, g0);
  p.R_cw = cam.R_cam_imu.transpose() * p.R_i.transpose();
  p.t_cam = cam.t_cam_imu;
  p.a_v = fi * integ.dt();
  p.a_g = 0.5 * fi * fi * integ.dt() * integ.dt();
  return p;
}

struct State {
  Eigen::Vector3d v0;
  Eigen::Vector3d g0;
  std::vector<Eigen::Vector3d> X;
};

double total_cost(const BaProblem& pb, const State& s) {
  const CorrespondenceSet& corrs = pb.full->correspondences();
  double cost = 0.0;
  for (std::size_t k = 0; k < pb.observations.size(); ++k) {
    const Observation& o = corrs.observations[pb.observations[k]];
    const Eigen::Vector2d r =
        o.u.head<2>() -
        reproject(s.X[pb.point_of[k]], s.v0, s.g0, o, pb.geometry);
    cost += r.squaredNorm();
  }
  return cost;
}

struct Normal {
  Eigen::Matrix<double, 6, 6> Hss = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> gs = Eigen::Matrix<double, 6, 1>::Zero();
  std::vector<Eigen::Matrix<double, 6, 3>> Hsp;
  std::vector<Eigen::Matrix3d> Hpp;
  std::vector<Eigen::Vector3d> gp;
};

Normal build_normal(const BaProblem& pb, const State& s) {
  const CorrespondenceSet& corrs = pb.full->correspondences();
  Normal n;
  const std::size_t np = s.X.size();
  n.Hsp.assign(np, Eigen::Matrix<double, 6, 3>::Zero());
  n.Hpp.assign(np, Eigen::Matrix3d::Zero());
  n.gp.assign(np, Eigen::Vector3d::Zero());
  for (std::size_t k = 0; k < pb.observations.size(); ++k) {
    const Observation& o = corrs.observations[pb.observations[k]];
    const auto p = static_cast<std::size_t>(pb.point_of[k]);
    const Projection proj =
        reproject_with_jacobians(s.X[p], s.v0, s.g0, o, pb.geometry);
    const Eigen::Vector2d r = o.u.head<2>() - proj.u;
    n.Hss.noalias() += proj.d_state.transpose() * proj.d_state;
    n.gs.noalias() += proj.d_state.transpose() * r;
    n.Hsp[p].noalias() += proj.d_state.transpose() * proj.d_point;
    n.Hpp[p].noalias() += proj.d_point.transpose() * proj.d_point;
    n.gp[p].noalias() += proj.d_point.transpose() * r;
  }
  return n;
}

/// Point-marginalized system (Hss - sum Hsp Hpp^-1 Hps) with optional
/// Marquardt scaling of the diagonals.
struct SchurSolve {
  Eigen::Matrix<double, 6, 1> ds;
  std::vector<Eigen::Vector3d> dp;
  bool ok = false;
};

SchurSolve solve_step(const Normal& n, double damping) {
  SchurSolve out;
  Eigen::Matrix<double, 6, 6> S = n.Hss;
  S.diagonal() *= 1.0 + damping;
  Eigen::Matrix<double, 6, 1> rhs = n.gs;
  std::vector<Eigen::Matrix3d> Hpp_inv(n.Hpp.size());
  for (std::size_t p = 0; p < n.Hpp.size(); ++p) {
    Eigen::Matrix3d Hpp = n.Hpp[p];
    Hpp.diagonal() *= 1.0 + damping;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(Hpp);
    if (!lu.isInvertible()) return out;
    Hpp_inv[p] = lu.inverse();
    S.noalias() -= n.Hsp[p] * Hpp_inv[p] * n.Hsp[p].transpose();
    rhs.noalias() -= n.Hsp[p] * Hpp_inv[p] * n.gp[p];
  }
  Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(S);
  if (ldlt.info() != Eigen::Success) return out;
  out.ds = ldlt.solve(rhs);
  if (!out.ds.allFinite()) return out;
  out.dp.resize(n.Hpp.size());
  for (std::size_t p = 0; p < n.Hpp.size(); ++p) {
    out.dp[p] = Hpp_inv[p] * (n.gp[p] - n.Hsp[p].transpose() * out.ds);
  }
  out.ok = true;
  return out;
}

Eigen::Matrix<double, 6, 6> schur_hessian(const Normal& n) {
  Eigen::Matrix<double, 6, 6> S = n.Hss;
  for (std::size_t p = 0; p < n.Hpp.size(); ++p) {
    S.noalias() -= n.Hsp[p] * n.Hpp[p].inverse() * n.Hsp[p].transpose();
  }
  return 0.5 * (S + S.transpose());
}

}  // namespace

BaProblem make_ba_problem(std::shared_ptr<const FullSystem> full,
                          const Geometry& geometry) {
  BaProblem pb;
  pb.geometry = geometry;
  std::unordered_map<int, int> point_index;
  for (const TrackBlock& block : full->blocks()) {
    const auto [it, inserted] = point_index.emplace(
        block.track_id, static_cast<int>(pb.track_of_point.size()));
    if (inserted) pb.track_of_point.push_back(block.track_id);
    for (int o : block.observations) {
      pb.observations.push_back(o);
      pb.point_of.push_back(it->second);
    }
  }
  if (pb.observations.size() * 2 <
      6 + 3 * pb.track_of_point.size()) {
    throw Error(ErrorCode::kInsufficientData,
                "fewer residuals than bundle-adjustment unknowns");
  }
  pb.full = std::move(full);
  return pb;
}

std::vector<Eigen::Vector3d> init_points(const BaProblem& pb,
                                         const Eigen::Vector3d& v0,
                                         const Eigen::Vector3d& g0) {
  const FullSystem& full = *pb.full;
  const CorrespondenceSet& corrs = full.correspondences();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(full.S().cols());
  y.head<3>() = v0;
  y.segment<3>(3) = g0;
  y(y.size() - 1) = 1.0;
  const DepthEstimate depths = recover_depths(full, y);

  const std::size_t np = pb.track_of_point.size();
  std::vector<Eigen::Vector3d> sum(np, Eigen::Vector3d::Zero());
  std::vector<int> count(np, 0);
  for (std::size_t k = 0; k < pb.observations.size(); ++k) {
    const int o = pb.observations[k];
    const double lambda = depths.lambda(o);
    if (!(lambda > 0.0)) continue;
    const CameraPose pose =
        camera_pose(corrs.observations[o], pb.geometry, v0, g0);
    const auto p = static_cast<std::size_t>(pb.point_of[k]);
    sum[p] += lambda * corrs.rays[o] + pose.t + pose.R_i * pose.t_cam;
    ++count[p];
  }
  std::vector<Eigen::Vector3d> X(np);
  for (std::size_t p = 0; p < np; ++p) {
    if (count[p] == 0) {
      throw Error(ErrorCode::kCheirality,
                  "track " + std::to_string(pb.track_of_point[p]) +
                      " has no positive depth");
    }
    X[p] = sum[p] / count[p];
  }
  return X;
}

Eigen::Vector2d reproject(const Eigen::Vector3d& X, const Eigen::Vector3d& v0,
                          const Eigen::Vector3d& g0, const Observation& obs,
                          const Geometry& geometry) {
  const CameraPose pose = camera_pose(obs, geometry, v0, g0);
  const Eigen::Vector3d Xc =
      pose.R_cw * (X - pose.t) -
      geometry.calib.camera(obs.cam_id).R_cam_imu.transpose() * pose.t_cam;
  if (!(Xc.z() > kMinDepth)) {
    throw Error(ErrorCode::kCheirality, "point behind the camera");
  }
  const Eigen::Vector3d h = geometry.calib.camera(obs.cam_id).K * Xc;
  return h.head<2>() / h.z();
}

Projection reproject_with_jacobians(const Eigen::Vector3d& X,
                                    const Eigen::Vector3d& v0,
                                    const Eigen::Vector3d& g0,
                                    const Observation& obs,
                                    const Geometry& geometry) {
  const CameraPose pose = camera_pose(obs, geometry, v0, g0);
  const CameraModel& cam = geometry.calib.camera(obs.cam_id);
  const Eigen::Vector3d Xc =
      pose.R_cw * (X - pose.t) - cam.R_cam_imu.transpose() * pose.t_cam;
  if (!(Xc.z() > kMinDepth)) {
    throw Error(ErrorCode::kCheirality, "point behind the camera");
  }
  const Eigen::Vector3d h = cam.K * Xc;
  Projection out;
  out.u = h.head<2>() / h.z();
  // d(h_xy / h_z) / d Xc
  Eigen::Matrix<double, 2, 3> dpi;
  dpi << 1.0 / h.z(), 0.0, -h.x() / (h.z() * h.z()), 0.0, 1.0 / h.z(),
      -h.y() / (h.z() * h.z());
  const Eigen::Matrix<double, 2, 3> dX = dpi * cam.K * pose.R_cw;
  out.d_point = dX;
  out.d_state.leftCols<3>() = -pose.a_v * dX;
  out.d_state.rightCols<3>() = -pose.a_g * dX;
  return out;
}

BaResult refine_lm(const BaProblem& problem, const InitEstimate& init,
                   const BaOptions& opts) {
  if (!init.v0.allFinite() || !init.g0.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite initial state");
  }
  State s{init.v0, init.g0,
          problem.points.empty() ? init_points(problem, init.v0, init.g0)
                                 : problem.points};

  BaResult res;
  double cost = total_cost(problem, s);
  res.initial_cost = cost;
  res.trace.push_back({0, cost, 0.0, true});
  const double floor = kTinyCost * static_cast<double>(problem.observations.size());

  double damping = opts.initial_damping;
  bool converged = cost <= floor;
  int it = 0;
  while (!converged && it < opts.max_iterations) {
    ++it;
    const Normal n = build_normal(problem, s);
    bool accepted = false;
    while (damping <= opts.max_damping) {
      const SchurSolve step = solve_step(n, damping);
      State trial = s;
      double trial_cost = std::numeric_limits<double>::infinity();
      if (step.ok) {
        trial.v0 += step.ds.head<3>();
        trial.g0 += step.ds.tail<3>();
        for (std::size_t p = 0; p < trial.X.size(); ++p) trial.X[p] += step.dp[p];
        try {
          trial_cost = total_cost(problem, trial);
        } catch (const Error&) {
          // A point crossed behind a camera: treat as a rejected step.
        }
      }
      if (trial_cost < cost) {
        const double rel = (cost - trial_cost) / cost;
        double step_norm = step.ds.norm();
        for (const auto& d : step.dp) step_norm = std::max(step_norm, d.norm());
        s = std::move(trial);
        cost = trial_cost;
        damping = std::max(damping / opts.damping_factor, 1e-15);
        res.trace.push_back({it, cost, damping, true});
        accepted = true;
        if (rel < opts.relative_tolerance || cost <= floor ||
            step_norm < 1e-14) {
          converged = true;
        }
        break;
      }
      res.trace.push_back({it, trial_cost, damping, false});
      damping *= opts.damping_factor;
    }
    if (!accepted) {
      // No descent possible even with maximal damping: the current point is
      // a minimum to numerical precision unless the cost is still dropping.
      converged = res.trace.size() > 1;
      break;
    }
  }

  res.points = s.X;
  res.final_cost = cost;
  InitEstimate& est = res.estimate;
  est.method = Method::kBa;
  est.v0 = s.v0;
  est.g0 = s.g0;
  Eigen::VectorXd y(7);
  y << s.v0, s.g0, 1.0;
  est.y = y.normalized();
  est.iterations = std::max(it, 1);
  est.converged = converged;

  const double dof = 2.0 * static_cast<double>(problem.observations.size()) -
                     6.0 - 3.0 * static_cast<double>(s.X.size());
  est.sigma_hat = dof > 0.0 ? std::sqrt(cost / dof) : 0.0;
  const Normal n = build_normal(problem, s);
  const Eigen::Matrix<double, 6, 6> H = schur_hessian(n);
  Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(H);
  if (lu.isInvertible()) {
    est.cov_unit = lu.inverse();
    est.cov = est.sigma_hat * est.sigma_hat * est.cov_unit;
  }
  return res;
}

}  // namespace rsvio
