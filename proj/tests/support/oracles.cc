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

#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/QR>

#include "rsvio/bias.h"

namespace rsvio::testing {

Eigen::MatrixXd central_difference(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd J;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    const Eigen::VectorXd d = (f(xp) - f(xm)) / (2.0 * h);
    if (J.size() == 0) J.resize(d.size(), x.size());
    J.col(k) = d;
  }
  return J;
}

double relative_error(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      double floor) {
  const double scale = std::max(B.cwiseAbs().maxCoeff(), floor);
  return (A - B).cwiseAbs().maxCoeff() / scale;
}

Eigen::Vector3d euler_position(const ImuStream& stream,
                               const Eigen::Vector3d& v0,
                               const Eigen::Vector3d& g0, std::int64_t i) {
  const double dt = stream.dt;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d v = v0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (std::int64_t k = 0; k < i; ++k) {
    const ImuSample& s = stream.samples[static_cast<std::size_t>(k)];
    const Eigen::Vector3d a = R * s.accel + g0;
    p += v * dt + 0.5 * a * dt * dt;
    v += a * dt;
    // Rodrigues written out rather than taken from the library.
    const Eigen::Vector3d phi = s.omega * dt;
    const double th = phi.norm();
    Eigen::Matrix3d step = Eigen::Matrix3d::Identity();
    if (th > 0.0) {
      const Eigen::Vector3d n = phi / th;
      Eigen::Matrix3d K;
      K << 0, -n.z(), n.y(), n.z(), 0, -n.x(), -n.y(), n.x(), 0;
      step += std::sin(th) * K + (1.0 - std::cos(th)) * K * K;
    }
    R = R * step;
  }
  return p;
}

Eigen::VectorXd full_system_affine_solution(const FullSystem& full) {
  const Eigen::MatrixXd SP = full.dense_SP();
  const int C = full.layout().cols();
  const Eigen::Index M = SP.cols() - C;
  Eigen::MatrixXd A(SP.rows(), C - 1 + M);
  A << SP.leftCols(C - 1), SP.rightCols(M);
  const Eigen::VectorXd rhs = -SP.col(C - 1);
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(rhs);
  return x.head(C - 1);
}

std::array<Eigen::MatrixXd, 3> numeric_row_jacobian(const ReducedSystem& red,
                                                    const RigCalibration& calib,
                                                    int pair, int observation,
                                                    double h) {
  const FullSystem& full = red.full();
  const CorrespondenceSet& corrs = full.correspondences();
  const Observation base = corrs.observations[observation];
  const Eigen::Matrix3d& R = corrs.rotations[observation];
  const int C = red.cols();
  auto rows = [&](const Eigen::VectorXd& u) {
    Observation o = base;
    o.u = Eigen::Vector3d(u(0), u(1), 1.0);
    const Eigen::Vector3d ray = calibrated_ray(o, calib, R);
    const ReducedSystem moved(
        std::make_shared<const FullSystem>(full.with_ray(observation, ray)));
    Eigen::VectorXd out(3 * C);
    for (int s = 0; s < 3; ++s) {
      out.segment(s * C, C) = moved.B().row(3 * pair + s).transpose();
    }
    return out;
  };
  const Eigen::MatrixXd J = central_difference(rows, base.u.head<2>(), h);
  std::array<Eigen::MatrixXd, 3> out;
  for (int s = 0; s < 3; ++s) out[s] = J.middleRows(s * C, C);
  return out;
}

ScenarioConfig pixel_noise_only(double sigma_px) {
  ScenarioConfig cfg;
  cfg.sigma_px = sigma_px;
  cfg.accel_noise = 0.0;
  cfg.rot_noise_deg = 0.0;
  return cfg;
}

double kappa_prediction_residual(const Scenario& scenario,
                                 const Eigen::Vector3d& gyro_bias) {
  const double dt = scenario.calib.readout_per_line;
  Geometry truth;
  truth.calib = scenario.calib;
  truth.integrator = std::make_shared<const ScanlineIntegrator>(scenario.imu, dt);

  ImuStream biased = scenario.imu;
  for (ImuSample& s : biased.samples) s.omega -= gyro_bias;
  ScanlineIntegrator::Options opts;
  opts.gyro_bias_jacobians = true;
  Geometry lin = truth;
  lin.integrator = std::make_shared<const ScanlineIntegrator>(biased, dt, opts);

  int frames = 0;
  for (const Track& t : scenario.tracks.tracks) {
    for (const Observation& o : t.observations) {
      frames = std::max(frames, o.frame + 1);
    }
  }
  const Pairing pairing = make_pairing(frames, PairPattern::kDense,
                                       scenario.calib.cameras.size() > 1
                                           ? CameraSetup::kStereo
                                           : CameraSetup::kMono);
  const CorrespondenceSet corrs =
      build_correspondences(scenario.tracks, pairing, truth);
  double worst = 0.0;
  for (const Correspondence& c : corrs.pairs) {
    const Observation& a = corrs.observations[c.a];
    const Observation& b = corrs.observations[c.b];
    const Eigen::Vector3d exact = pair_coefficients(truth, a, b).kappa;
    const Eigen::Vector3d pred =
        pair_coefficients(lin, a, b).kappa +
        (gyro_bias_jacobians(lin, a).dkappa -
         gyro_bias_jacobians(lin, b).dkappa) *
            gyro_bias;
    worst = std::max(worst, (exact - pred).norm());
  }
  return worst;
}

RandomProblem make_random_problem(std::uint64_t index, double sigma_px) {
  std::mt19937_64 rng(0x5eed0000ULL + index);
  const TrajectoryKind kinds[] = {TrajectoryKind::kForward,
                                  TrajectoryKind::kLoop, TrajectoryKind::kShake,
                                  TrajectoryKind::kForwardBack};
  RandomProblem rp;
  rp.trajectory.kind = kinds[index % 4];
  rp.config.sigma_px = sigma_px;
  rp.config.n_points = std::uniform_int_distribution<int>(12, 30)(rng);
  rp.config.camera =
      (index / 4) % 2 == 0 ? CameraSetup::kStereo : CameraSetup::kMono;
  // Monocular windows need five frames to constrain the scale.
  const int min_frames = rp.config.camera == CameraSetup::kMono ? 5 : 3;
  rp.config.frames = std::uniform_int_distribution<int>(min_frames, 5)(rng);
  rp.config.seed = rng();
  rp.scenario = generate_scenario(rp.trajectory, rp.config, 0);
  rp.data = perturb(rp.scenario, rp.config, rng());
  rp.options.camera = rp.config.camera;
  rp.options.frames = rp.config.frames;
  rp.problem = prepare(rp.data.imu, rp.scenario.calib, rp.data.tracks,
                       rp.options, rp.data.jitter);
  return rp;
}

}  // namespace rsvio::testing
