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

// Discrete IMU integration at scanline rate and calibrated ray formation for
// rolling-shutter cameras rigidly attached to an IMU.
//
// Conventions:
//  * The origin is the IMU frame at the first scanline (row 0) of the first
//    frame: R_0 = I, t_0 = 0.
//  * Scanline index i counts scanline periods from the origin, rows are read
//    top to bottom: i = round((frame / fps + row * readout_per_line) / dt).
//  * R_i maps IMU-at-i coordinates into the origin frame, t_i is the IMU
//    position at i expressed in the origin frame.

#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace rsvio {

struct ImuSample {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // rad/s
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  // m/s^2, specific force
};

struct ImuLimits {
  double max_omega = 50.0;
  double max_accel = 200.0;
};

/// Uniformly sampled IMU readings; samples[k] is taken at t0 + k * dt.
struct ImuStream {
  std::vector<ImuSample> samples;
  double dt = 0.0;
  double t0 = 0.0;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return samples.empty() ? 0.0 : dt * static_cast<double>(size() - 1);
  }
  /// Throws Error(kInvalidArgument) on empty streams, non-positive dt,
  /// non-finite or out-of-cap readings.
  void validate(const ImuLimits& limits = {}) const;
};

/// Linear interpolation of omega and accel onto a finer grid starting at t0.
ImuStream upsample_imu(const ImuStream& stream, double target_dt);

/// prod_{k<i} Exp(omega_k dt); re-projected onto SO(3) every 1000 steps.
Eigen::Matrix3d integrate_rotation(const ImuStream& stream, std::int64_t i);

/// All partial products R_0..R_n of a stream with n samples.
std::vector<Eigen::Matrix3d> integrate_rotations(const ImuStream& stream);

/// Direct evaluation of
///   t_i = i v0 dt + (sum_{k<i} (2i - 2k - 1) R_k a_k + i^2 g0) dt^2 / 2.
/// O(i); the ScanlineIntegrator gives the same values in O(1) per query.
Eigen::Vector3d integrate_translation(
    const ImuStream& stream, const std::vector<Eigen::Matrix3d>& rotations,
    const Eigen::Vector3d& v0, const Eigen::Vector3d& g0, std::int64_t i);

struct CameraModel {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R_cam_imu = Eigen::Matrix3d::Identity();  // camera -> IMU
  Eigen::Vector3d t_cam_imu = Eigen::Vector3d::Zero();      // camera in IMU

  double focal() const { return 0.5 * (K(0, 0) + K(1, 1)); }
};

struct RigCalibration {
  std::vector<CameraModel> cameras;
  double readout_per_line = 0.0;  // s
  int image_height = 0;           // rows
  int image_width = 0;            // columns, used for visibility checks only
  double fps = 0.0;               // Hz

  const CameraModel& camera(int cam_id) const;
  /// Throws Error(kInvalidArgument) when an invariant is violated.
  void validate() const;
};

struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

struct Observation {
  int cam_id = 0;
  int frame = 0;
  int row = 0;
  Eigen::Vector3d u = Eigen::Vector3d::UnitZ();  // homogeneous pixel, u3 = 1
  std::int64_t scanline = -1;                    // filled by Geometry
};

enum class IntegrationMode {
  kInterpolateThenIntegrate,
  kIntegrateThenInterpolate,
};

enum class ShutterModel {
  kRolling,
  kGlobalOnRolling,  // every row of a frame uses the middle-row pose
};

/// Precomputed per-scanline rotations and the acceleration-dependent part of
/// the translation, so that t_i(v0, g0) is an O(1) affine evaluation.
///
/// The stream must start at the origin scanline. In interpolate-then-integrate
/// mode the stream is upsampled to the scanline period and integrated; in
/// integrate-then-interpolate mode it is integrated at its native rate and the
/// per-scanline quantities are interpolated (slerp for rotations, linear
/// otherwise).
class ScanlineIntegrator {
 public:
  struct Options {
    IntegrationMode mode = IntegrationMode::kInterpolateThenIntegrate;
    /// Also accumulate the first-order gyroscope-bias Jacobians.
    bool gyro_bias_jacobians = false;
    int reorthonormalize_every = 1000;
  };

  ScanlineIntegrator(const ImuStream& stream, double scanline_dt);
  ScanlineIntegrator(const ImuStream& stream, double scanline_dt,
                     Options options);

  double dt() const { return dt_; }
  /// Largest valid scanline index.
  std::int64_t max_index() const { return max_index_; }
  bool covers(std::int64_t i) const { return i >= 0 && i <= max_index_; }
  const Options& options() const { return options_; }

  Eigen::Matrix3d rotation(std::int64_t i) const;
  /// (sum_{k<i} beta_{k,i} R_k a_k) dt^2 / 2.
  Eigen::Vector3d accel_displacement(std::int64_t i) const;
  /// (sum_{k<i} beta_{k,i} R_k) dt^2 / 2, the accelerometer-bias coefficient.
  Eigen::Matrix3d accel_bias_coefficient(std::int64_t i) const;
  Eigen::Vector3d translation(std::int64_t i, const Eigen::Vector3d& v0,
                              const Eigen::Vector3d& g0) const;
  Pose pose(std::int64_t i, const Eigen::Vector3d& v0,
            const Eigen::Vector3d& g0) const;

  /// Right-perturbation Jacobian of R_i w.r.t. an additive gyro correction:
  /// sum_{k<i} R_{k+1}^i Jr(omega_k dt) dt. Requires gyro_bias_jacobians.
  Eigen::Matrix3d rotation_gyro_jacobian(std::int64_t i) const;
  /// d accel_displacement(i) / d e_omega. Requires gyro_bias_jacobians.
  Eigen::Matrix3d accel_displacement_gyro_jacobian(std::int64_t i) const;

 private:
  struct Knot {
    Eigen::Matrix3d R;
    Eigen::Vector3d D;
    Eigen::Matrix3d E;
    Eigen::Matrix3d JR;  // right-perturbation gyro Jacobian of R
    Eigen::Matrix3d DG;  // gyro Jacobian of D
  };

  void integrate(const ImuStream& stream);
  void check(std::int64_t i) const;
  /// Knot index and fraction for scanline i.
  std::pair<std::size_t, double> locate(std::int64_t i) const;

  Options options_;
  double dt_ = 0.0;
  double knot_dt_ = 0.0;
  std::int64_t max_index_ = -1;
  std::vector<Knot> knots_;
};

/// Small left-multiplied rotation perturbations keyed by scanline index,
/// used to emulate noisy gyro-integrated orientation at observation times.
using RotationJitter = std::unordered_map<std::int64_t, Eigen::Matrix3d>;

/// Everything needed to turn an observation into a ray and a pose.
struct Geometry {
  RigCalibration calib;
  std::shared_ptr<const ScanlineIntegrator> integrator;
  ShutterModel shutter = ShutterModel::kRolling;
  RotationJitter jitter;

  /// Scanline index of (frame, row) under the configured shutter model.
  std::int64_t scanline_index(int frame, int row) const;
  /// Observation rotation R_i, including jitter when present.
  Eigen::Matrix3d rotation(std::int64_t i) const;
  /// Returns a copy of obs with the scanline filled in; validates ranges.
  Observation locate(Observation obs) const;
};

/// (frame, row) -> pose of the IMU at that scanline.
Pose scanline_pose(const ScanlineIntegrator& integrator,
                   const RigCalibration& calib, int frame, int row,
                   const Eigen::Vector3d& v0, const Eigen::Vector3d& g0,
                   ShutterModel shutter = ShutterModel::kRolling);

/// N(R_i R_c K^-1 u), the ray normalized by its third coordinate.
Eigen::Vector3d calibrated_ray(const Observation& obs,
                               const RigCalibration& calib,
                               const Eigen::Matrix3d& R_i0);

/// Un-normalized ray R_i R_c K^-1 u.
Eigen::Vector3d raw_ray(const Observation& obs, const RigCalibration& calib,
                        const Eigen::Matrix3d& R_i0);

/// Third components smaller than this (relative to the ray norm) are treated
/// as rays parallel to the normalization plane.
inline constexpr double kMinRayDepth = 1e-9;

}  // namespace rsvio
