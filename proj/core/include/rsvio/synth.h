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

// Synthetic scenes: ideal IMU readings from an analytic trajectory, points
// projected through the rolling-shutter poses, and the noise model applied
// on top of them.

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "rsvio/estimators.h"
#include "rsvio/geometry.h"
#include "rsvio/system.h"
#include "rsvio/trajectory.h"

namespace rsvio {

struct ScenarioConfig {
  double sigma_px = 0.0;
  double accel_noise = 0.005;   // m/s^2
  double rot_noise_deg = 0.02;  // deg
  int n_points = 50;
  double depth_min = 1.0;  // m
  double depth_max = 15.0;
  int frames = 5;
  PairPattern pairing = PairPattern::kDense;
  ShutterModel shutter = ShutterModel::kRolling;
  CameraSetup camera = CameraSetup::kStereo;
  double baseline = 0.14;  // m
  std::uint64_t seed = 1;

  // Rig and sensor.
  double imu_rate = 800.0;  // Hz
  double fps = 10.0;
  int image_width = 640;
  int image_height = 480;
  double focal = 500.0;
  /// Scanline period; 1/48 kHz reads a VGA frame in 10 ms.
  double readout_per_line = 1.0 / 48000.0;

  /// Injected constant biases (correction convention: true = reading + e).
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
};

/// Stereo rig with cameras aligned to the IMU axes and +-baseline/2 offsets.
RigCalibration make_rig(const ScenarioConfig& cfg);

struct Scenario {
  ImuStream imu;  // ideal readings, t0 = 0 at the window origin
  RigCalibration calib;
  TrackSet tracks;  // noiseless, every camera of every frame
  std::vector<Eigen::Vector3d> points;  // origin frame
  Eigen::Vector3d v0 = Eigen::Vector3d::Zero();
  Eigen::Vector3d g0 = Eigen::Vector3d::Zero();
  int window = 0;
  double t_start = 0.0;  // window origin on the trajectory time axis
};

/// Standard gravity used by the simulator, along +y of the world frame.
inline constexpr double kGravity = 9.81;

/// Throws Error(kInvalidArgument) on invalid configurations and
/// Error(kInsufficientData) when points cannot be placed in view.
Scenario generate_scenario(const TrajectorySpec& traj,
                           const ScenarioConfig& cfg, int window = 0);

/// Ground-truth integrator of a scenario (interpolate-then-integrate).
std::shared_ptr<const ScanlineIntegrator> ideal_integrator(
    const Scenario& scenario);

struct NoisyData {
  ImuStream imu;
  TrackSet tracks;
  RotationJitter jitter;
};

/// Pixel noise sigma_px on both coordinates, accelerometer noise, constant
/// biases, and a small random rotation on the orientation of every
/// observation scanline. Deterministic in trial_seed.
NoisyData perturb(const Scenario& scenario, const ScenarioConfig& cfg,
                  std::uint64_t trial_seed);

struct ErrorMetrics {
  double eps_v = 0.0;  // m/s
  double eps_g = 0.0;  // deg
};

ErrorMetrics error_metrics(const Eigen::Vector3d& v0, const Eigen::Vector3d& g0,
                           const Eigen::Vector3d& v0_gt,
                           const Eigen::Vector3d& g0_gt);
ErrorMetrics error_metrics(const InitEstimate& est, const Scenario& gt);

/// (track id, cam, frame) of a corrupted observation.
using ObservationKey = std::tuple<int, int, int>;

/// Replaces observations by uniformly random pixels until at least
/// `fraction` of the pairs produced by `pairing` contain one. Returns the
/// corrupted observations.
std::set<ObservationKey> inject_outliers(TrackSet& tracks,
                                         const Pairing& pairing,
                                         const RigCalibration& calib,
                                         double fraction, std::mt19937_64& rng);

/// Deterministic seed for (base seed, sigma, window, trial).
std::uint64_t trial_seed(std::uint64_t seed, double sigma, int window,
                         int trial);

}  // namespace rsvio
