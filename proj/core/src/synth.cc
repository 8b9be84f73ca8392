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

#include "rsvio/synth.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <optional>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "rsvio/error.h"
#include "rsvio/so3.h"

namespace rsvio {
namespace {

constexpr int kMaxPlacementAttempts = 1000;
constexpr int kMaxRowIterations = 20;
constexpr double kMinPointDepth = 0.1;

void validate(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "scenario: " + what);
  };
  if (cfg.sigma_px < 0.0 || cfg.accel_noise < 0.0 || cfg.rot_noise_deg < 0.0) {
    fail("noise levels must be non-negative");
  }
  if (!(cfg.depth_min > 0.0) || !(cfg.depth_max >= cfg.depth_min)) {
    fail("depth range must be positive and ordered");
  }
  if (cfg.n_points < 1) fail("need at least one point");
  if (cfg.frames < 2) fail("need at least two frames");
  if (!(cfg.imu_rate > 0.0) || !(cfg.fps > 0.0)) fail("rates must be positive");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<int> cameras_of(const ScenarioConfig& cfg) {
  return cfg.camera == CameraSetup::kStereo ? std::vector<int>{0, 1}
                                            : std::vector<int>{0};
}

/// Rolling-shutter projection: the row read out at the projected position
/// must be the row whose pose was used.
std::optional<Observation> project_rs(const Eigen::Vector3d& X, int cam_id,
                                      int frame, const Geometry& geometry,
                                      const Eigen::Vector3d& v0,
                                      const Eigen::Vector3d& g0) {
  const RigCalibration& calib = geometry.calib;
  const CameraModel& cam = calib.camera(cam_id);
  int row = calib.image_height / 2;
  Eigen::Vector3d u;
  for (int it = 0; it < kMaxRowIterations; ++it) {
    const std::int64_t i = geometry.scanline_index(frame, row);
    if (!geometry.integrator->covers(i)) return std::nullopt;
    const Pose pose = geometry.integrator->pose(i, v0, g0);
    const Eigen::Vector3d Xc =
        cam.R_cam_imu.transpose() *
        (pose.R.transpose() * (X - pose.t) - cam.t_cam_imu);
    if (Xc.z() < kMinPointDepth) return std::nullopt;
    u = cam.K * Xc;
    u /= u.z();
    const int next = static_cast<int>(std::floor(u.y()));
    if (next < 0 || next >= calib.image_height) return std::nullopt;
    if (next == row) break;
    row = next;
    if (it + 1 == kMaxRowIterations) {
      // Oscillation between two rows: keep the last row, re-project with it.
      const std::int64_t j = geometry.scanline_index(frame, row);
      const Pose p2 = geometry.integrator->pose(j, v0, g0);
      const Eigen::Vector3d Xc2 =
          cam.R_cam_imu.transpose() *
          (p2.R.transpose() * (X - p2.t) - cam.t_cam_imu);
      u = cam.K * Xc2;
      u /= u.z();
    }
  }
  if (u.x() < 0.0 || u.x() >= calib.image_width || u.y() < 0.0 ||
      u.y() >= calib.image_height) {
    return std::nullopt;
  }
  Observation obs;
  obs.cam_id = cam_id;
  obs.frame = frame;
  obs.row = row;
  obs.u = u;
  return obs;
}

}  // namespace

RigCalibration make_rig(const ScenarioConfig& cfg) {
  RigCalibration calib;
  Eigen::Matrix3d K;
  K << cfg.focal, 0.0, 0.5 * cfg.image_width, 0.0, cfg.focal,
      0.5 * cfg.image_height, 0.0, 0.0, 1.0;
  for (int c = 0; c < 2; ++c) {
    CameraModel cam;
    cam.K = K;
    cam.R_cam_imu.setIdentity();
    cam.t_cam_imu = Eigen::Vector3d((c == 0 ? -0.5 : 0.5) * cfg.baseline, 0, 0);
    calib.cameras.push_back(cam);
  }
  calib.readout_per_line = cfg.readout_per_line;
  calib.image_height = cfg.image_height;
  calib.image_width = cfg.image_width;
  calib.fps = cfg.fps;
  calib.validate();
  return calib;
}

Scenario generate_scenario(const TrajectorySpec& traj,
                           const ScenarioConfig& cfg, int window) {
  validate(cfg);
  if (window < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative window index");
  }
  Scenario sc;
  sc.calib = make_rig(cfg);
  sc.window = window;
  sc.t_start = static_cast<double>(window) / cfg.fps;

  const double span = static_cast<double>(cfg.frames - 1) / cfg.fps +
                      cfg.image_height * cfg.readout_per_line;
  const auto n_samples =
      static_cast<std::size_t>(std::ceil(span * cfg.imu_rate)) + 2;
  const double needed =
      sc.t_start + static_cast<double>(n_samples) / cfg.imu_rate;
  const bool bounded = traj.kind != TrajectoryKind::kStatic &&
                       traj.kind != TrajectoryKind::kShake;
  if (bounded && trajectory_duration(traj) < needed) {
    throw Error(ErrorCode::kInvalidArgument,
                "trajectory too short for window " + std::to_string(window));
  }

  const Eigen::Vector3d g_w(0.0, kGravity, 0.0);
  sc.imu.dt = 1.0 / cfg.imu_rate;
  sc.imu.t0 = 0.0;
  sc.imu.samples.resize(n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const TrajectorySample s = sample_trajectory(
        traj, sc.t_start + static_cast<double>(k) * sc.imu.dt);
    sc.imu.samples[k].omega = s.omega;
    sc.imu.samples[k].accel = s.R.transpose() * (s.a - g_w);
  }
  const TrajectorySample s0 = sample_trajectory(traj, sc.t_start);
  sc.v0 = s0.R.transpose() * s0.v;
  sc.g0 = s0.R.transpose() * g_w;

  Geometry geometry;
  geometry.calib = sc.calib;
  geometry.integrator = ideal_integrator(sc);

  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x5ce7e5eedULL) +
                      static_cast<std::uint64_t>(window));
  std::uniform_real_distribution<double> ux(0.0, cfg.image_width);
  std::uniform_real_distribution<double> uy(0.0, cfg.image_height);
  std::uniform_real_distribution<double> ud(cfg.depth_min, cfg.depth_max);
  const std::vector<int> cams = cameras_of(cfg);
  const CameraModel& cam0 = sc.calib.cameras[0];
  const Eigen::Matrix3d Kinv = cam0.K.inverse();

  for (int p = 0; p < cfg.n_points; ++p) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed;
         ++attempt) {
      const double x = ux(rng);
      const double y = uy(rng);
      const double depth = ud(rng);
      Observation first;
      first.cam_id = 0;
      first.frame = 0;
      first.row = std::min(static_cast<int>(std::floor(y)),
                           cfg.image_height - 1);
      first.u = Eigen::Vector3d(x, y, 1.0);
      const Pose pose = geometry.integrator->pose(
          geometry.scanline_index(0, first.row), sc.v0, sc.g0);
      const Eigen::Vector3d Xc = depth * (Kinv * first.u);
      const Eigen::Vector3d X =
          pose.t + pose.R * (cam0.R_cam_imu * Xc + cam0.t_cam_imu);

      Track track;
      track.id = p;
      track.observations.push_back(first);
      bool visible = true;
      for (int f = 0; f < cfg.frames && visible; ++f) {
        for (int c : cams) {
          if (f == 0 && c == 0) continue;
          auto obs = project_rs(X, c, f, geometry, sc.v0, sc.g0);
          if (!obs) {
            visible = false;
            break;
          }
          track.observations.push_back(*obs);
        }
      }
      if (!visible) continue;
      sc.tracks.tracks.push_back(std::move(track));
      sc.points.push_back(X);
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::kInsufficientData,
                  "could not place point " + std::to_string(p) +
                      " inside every view");
    }
  }
  return sc;
}

std::shared_ptr<const ScanlineIntegrator> ideal_integrator(
    const Scenario& scenario) {
  return std::make_shared<const ScanlineIntegrator>(
      scenario.imu, scenario.calib.readout_per_line);
}

NoisyData perturb(const Scenario& scenario, const ScenarioConfig& cfg,
                  std::uint64_t seed) {
  validate(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  NoisyData out;
  out.imu = scenario.imu;
  for (ImuSample& s : out.imu.samples) {
    if (cfg.accel_noise > 0.0) {
      for (int k = 0; k < 3; ++k) s.accel(k) += cfg.accel_noise * unit(rng);
    }
    s.accel -= cfg.accel_bias;
    s.omega -= cfg.gyro_bias;
  }

  out.tracks = scenario.tracks;
  for (Track& t : out.tracks.tracks) {
    for (Observation& o : t.observations) {
      if (cfg.sigma_px > 0.0) {
        o.u.x() += cfg.sigma_px * unit(rng);
        o.u.y() += cfg.sigma_px * unit(rng);
      }
    }
  }

  if (cfg.rot_noise_deg > 0.0) {
    const double std_rad = cfg.rot_noise_deg * std::numbers::pi / 180.0;
    const RigCalibration& calib = scenario.calib;
    for (const Track& t : out.tracks.tracks) {
      for (const Observation& o : t.observations) {
        const int row = cfg.shutter == ShutterModel::kGlobalOnRolling
                            ? calib.image_height / 2
                            : o.row;
        const double time = static_cast<double>(o.frame) / calib.fps +
                            row * calib.readout_per_line;
        const std::int64_t i = std::llround(time / calib.readout_per_line);
        if (out.jitter.count(i)) continue;
        Eigen::Vector3d axis(unit(rng), unit(rng), unit(rng));
        axis.normalize();
        out.jitter.emplace(i, so3::exp(axis * (std_rad * unit(rng))));
      }
    }
  }
  return out;
}

ErrorMetrics error_metrics(const Eigen::Vector3d& v0, const Eigen::Vector3d& g0,
                           const Eigen::Vector3d& v0_gt,
                           const Eigen::Vector3d& g0_gt) {
  if (!(g0.norm() > 0.0) || !(g0_gt.norm() > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "zero-length gravity vector");
  }
  ErrorMetrics m;
  m.eps_v = (v0 - v0_gt).norm();
  m.eps_g = std::atan2(g0.cross(g0_gt).norm(), g0.dot(g0_gt)) * 180.0 /
            std::numbers::pi;
  return m;
}

ErrorMetrics error_metrics(const InitEstimate& est, const Scenario& gt) {
  return error_metrics(est.v0, est.g0, gt.v0, gt.g0);
}

std::set<ObservationKey> inject_outliers(TrackSet& tracks,
                                         const Pairing& pairing,
                                         const RigCalibration& calib,
                                         double fraction,
                                         std::mt19937_64& rng) {
  std::set<ObservationKey> corrupted;
  if (fraction <= 0.0) return corrupted;

  struct PairRef {
    int track;
    ObservationKey a, b;
  };
  std::vector<PairRef> pairs;
  std::vector<ObservationKey> candidates;
  std::set<ObservationKey> seen;
  for (const Track& t : tracks.tracks) {
    auto has = [&](const CameraFrame& cf) {
      return std::any_of(t.observations.begin(), t.observations.end(),
                         [&](const Observation& o) {
                           return o.cam_id == cf.cam_id && o.frame == cf.frame;
                         });
    };
    for (const auto& [a, b] : pairing) {
      if (!has(a) || !has(b)) continue;
      const ObservationKey ka{t.id, a.cam_id, a.frame};
      const ObservationKey kb{t.id, b.cam_id, b.frame};
      pairs.push_back({t.id, ka, kb});
      for (const auto& k : {ka, kb}) {
        if (seen.insert(k).second) candidates.push_back(k);
      }
    }
  }
  if (pairs.empty()) return corrupted;

  std::shuffle(candidates.begin(), candidates.end(), rng);
  std::uniform_real_distribution<double> ux(0.0, calib.image_width);
  std::uniform_real_distribution<double> uy(0.0, calib.image_height);
  const auto target = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(pairs.size())));
  std::size_t affected = 0;
  for (const ObservationKey& key : candidates) {
    if (affected >= target) break;
    corrupted.insert(key);
    affected = static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(), [&](const PairRef& p) {
          return corrupted.count(p.a) || corrupted.count(p.b);
        }));
  }

  for (Track& t : tracks.tracks) {
    for (Observation& o : t.observations) {
      if (corrupted.count({t.id, o.cam_id, o.frame})) {
        o.u.x() = ux(rng);
        o.u.y() = uy(rng);
      }
    }
  }
  return corrupted;
}

std::uint64_t trial_seed(std::uint64_t seed, double sigma, int window,
                         int trial) {
  std::uint64_t bits = 0;
  static_assert(sizeof(bits) == sizeof(sigma));
  std::memcpy(&bits, &sigma, sizeof(bits));
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ bits);
  h = splitmix64(h ^ static_cast<std::uint64_t>(window));
  h = splitmix64(h ^ static_cast<std::uint64_t>(trial));
  return h;
}

}  // namespace rsvio
