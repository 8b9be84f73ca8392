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

#include "rsvio/geometry.h"

#include <cmath>
#include <sstream>

#include <Eigen/LU>

#include "rsvio/error.h"
#include "rsvio/so3.h"

namespace rsvio {
namespace {

constexpr int kDefaultReorthonormalizeEvery = 1000;

std::string describe_index(std::int64_t i, std::int64_t max) {
  std::ostringstream os;
  os << "scanline index " << i << " outside [0, " << max << "]";
  return os.str();
}

}  // namespace

void ImuStream::validate(const ImuLimits& limits) const {
  if (samples.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "IMU stream is empty");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCode::kInvalidArgument, "IMU stream dt must be > 0");
  }
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (!s.omega.allFinite() || !s.accel.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "non-finite IMU sample at index " + std::to_string(k));
    }
    if (s.omega.norm() >= limits.max_omega ||
        s.accel.norm() >= limits.max_accel) {
      throw Error(ErrorCode::kInvalidArgument,
                  "IMU sample above physical cap at index " +
                      std::to_string(k));
    }
  }
}

ImuStream upsample_imu(const ImuStream& stream, double target_dt) {
  if (!(target_dt > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target_dt must be > 0");
  }
  if (stream.samples.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "IMU stream is empty");
  }
  if (target_dt > stream.dt * (1.0 + 1e-12)) {
    throw Error(ErrorCode::kInvalidArgument,
                "upsample_imu only refines: target_dt > stream.dt");
  }
  const double duration = stream.duration();
  const auto count =
      static_cast<std::size_t>(std::floor(duration / target_dt + 1e-9)) + 1;

  ImuStream out;
  out.dt = target_dt;
  out.t0 = stream.t0;
  out.samples.resize(count);
  const std::size_t last = stream.samples.size() - 1;
  for (std::size_t m = 0; m < count; ++m) {
    const double x = static_cast<double>(m) * target_dt / stream.dt;
    auto k = static_cast<std::size_t>(std::floor(x + 1e-12));
    double f = x - static_cast<double>(k);
    if (k >= last) {
      k = last;
      f = 0.0;
    }
    if (std::abs(f) < 1e-12) {
      out.samples[m] = stream.samples[k];
      continue;
    }
    const auto& a = stream.samples[k];
    const auto& b = stream.samples[k + 1];
    out.samples[m].omega = (1.0 - f) * a.omega + f * b.omega;
    out.samples[m].accel = (1.0 - f) * a.accel + f * b.accel;
  }
  return out;
}

Eigen::Matrix3d integrate_rotation(const ImuStream& stream, std::int64_t i) {
  const auto n = static_cast<std::int64_t>(stream.samples.size());
  if (i < 0 || i > n) {
    throw Error(ErrorCode::kOutOfRange, describe_index(i, n));
  }
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  for (std::int64_t k = 0; k < i; ++k) {
    R = R * so3::exp(stream.samples[k].omega * stream.dt);
    if ((k + 1) % kDefaultReorthonormalizeEvery == 0) {
      R = so3::nearest_rotation(R);
    }
  }
  return R;
}

std::vector<Eigen::Matrix3d> integrate_rotations(const ImuStream& stream) {
  std::vector<Eigen::Matrix3d> out;
  out.reserve(stream.samples.size() + 1);
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  out.push_back(R);
  for (std::size_t k = 0; k < stream.samples.size(); ++k) {
    R = R * so3::exp(stream.samples[k].omega * stream.dt);
    if ((k + 1) % kDefaultReorthonormalizeEvery == 0) {
      R = so3::nearest_rotation(R);
    }
    out.push_back(R);
  }
  return out;
}

Eigen::Vector3d integrate_translation(
    const ImuStream& stream, const std::vector<Eigen::Matrix3d>& rotations,
    const Eigen::Vector3d& v0, const Eigen::Vector3d& g0, std::int64_t i) {
  const auto n = static_cast<std::int64_t>(stream.samples.size());
  if (i < 0 || i > n || i > static_cast<std::int64_t>(rotations.size())) {
    throw Error(ErrorCode::kOutOfRange, describe_index(i, n));
  }
  const double dt = stream.dt;
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (std::int64_t k = 0; k < i; ++k) {
    const double beta = static_cast<double>(2 * i - 2 * k - 1);
    acc += beta * (rotations[k] * stream.samples[k].accel);
  }
  const auto fi = static_cast<double>(i);
  return fi * dt * v0 + (acc + fi * fi * g0) * (dt * dt / 2.0);
}

// ---------------------------------------------------------------------------

ScanlineIntegrator::ScanlineIntegrator(const ImuStream& stream,
                                       double scanline_dt)
    : ScanlineIntegrator(stream, scanline_dt, Options{}) {}

ScanlineIntegrator::ScanlineIntegrator(const ImuStream& stream,
                                       double scanline_dt, Options options)
    : options_(options), dt_(scanline_dt) {
  if (!(scanline_dt > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "scanline dt must be > 0");
  }
  stream.validate();
  if (options_.reorthonormalize_every <= 0) {
    options_.reorthonormalize_every = kDefaultReorthonormalizeEvery;
  }
  if (options_.mode == IntegrationMode::kInterpolateThenIntegrate) {
    if (std::abs(stream.dt - scanline_dt) <= 1e-12 * scanline_dt) {
      integrate(stream);
    } else {
      integrate(upsample_imu(stream, scanline_dt));
    }
    max_index_ = static_cast<std::int64_t>(knots_.size()) - 1;
  } else {
    integrate(stream);
    const double span = knot_dt_ * static_cast<double>(knots_.size() - 1);
    max_index_ = static_cast<std::int64_t>(std::floor(span / dt_ + 1e-9));
  }
}

void ScanlineIntegrator::integrate(const ImuStream& stream) {
  knot_dt_ = stream.dt;
  const double h = 0.5 * knot_dt_ * knot_dt_;
  const std::size_t n = stream.samples.size();
  knots_.resize(n + 1);

  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d D = Eigen::Vector3d::Zero();
  Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
  // Running sums: A = sum R_k a_k, F = sum R_k, Q = sum R_{k+1} Jr_k dt,
  // T = sum d(R_k a_k)/de.
  Eigen::Vector3d A = Eigen::Vector3d::Zero();
  Eigen::Matrix3d F = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d Q = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d T = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d DG = Eigen::Matrix3d::Zero();
  const bool gyro = options_.gyro_bias_jacobians;

  for (std::size_t k = 0; k <= n; ++k) {
    Knot& knot = knots_[k];
    knot.R = R;
    knot.D = D;
    knot.E = E;
    if (gyro) {
      knot.JR = R.transpose() * Q;
      knot.DG = DG;
    }
    if (k == n) break;

    const auto& s = stream.samples[k];
    const Eigen::Vector3d Ra = R * s.accel;
    // beta_{k,i+1} = beta_{k,i} + 2, so the weighted sums advance by
    // 2 * (running sum) + newest term.
    D += h * (2.0 * A + Ra);
    A += Ra;
    E += h * (2.0 * F + R);
    F += R;

    const Eigen::Vector3d phi = s.omega * knot_dt_;
    Eigen::Matrix3d next = R * so3::exp(phi);
    if ((k + 1) % static_cast<std::size_t>(options_.reorthonormalize_every) ==
        0) {
      next = so3::nearest_rotation(next);
    }
    if (gyro) {
      const Eigen::Matrix3d dRa = -so3::skew(Ra) * Q;
      DG += h * (2.0 * T + dRa);
      T += dRa;
      Q += next * so3::right_jacobian(phi) * knot_dt_;
    }
    R = next;
  }
}

void ScanlineIntegrator::check(std::int64_t i) const {
  if (!covers(i)) {
    throw Error(ErrorCode::kOutOfRange, describe_index(i, max_index_));
  }
}

std::pair<std::size_t, double> ScanlineIntegrator::locate(
    std::int64_t i) const {
  if (options_.mode == IntegrationMode::kInterpolateThenIntegrate) {
    return {static_cast<std::size_t>(i), 0.0};
  }
  const double x = static_cast<double>(i) * dt_ / knot_dt_;
  auto k = static_cast<std::size_t>(std::floor(x + 1e-12));
  double f = x - static_cast<double>(k);
  if (k >= knots_.size() - 1) {
    k = knots_.size() - 1;
    f = 0.0;
  }
  if (f < 1e-12) f = 0.0;
  return {k, f};
}

Eigen::Matrix3d ScanlineIntegrator::rotation(std::int64_t i) const {
  check(i);
  const auto [k, f] = locate(i);
  if (f == 0.0) return knots_[k].R;
  return so3::slerp(knots_[k].R, knots_[k + 1].R, f);
}

Eigen::Vector3d ScanlineIntegrator::accel_displacement(std::int64_t i) const {
  check(i);
  const auto [k, f] = locate(i);
  if (f == 0.0) return knots_[k].D;
  return (1.0 - f) * knots_[k].D + f * knots_[k + 1].D;
}

Eigen::Matrix3d ScanlineIntegrator::accel_bias_coefficient(
    std::int64_t i) const {
  check(i);
  const auto [k, f] = locate(i);
  if (f == 0.0) return knots_[k].E;
  return (1.0 - f) * knots_[k].E + f * knots_[k + 1].E;
}

Eigen::Matrix3d ScanlineIntegrator::rotation_gyro_jacobian(
    std::int64_t i) const {
  if (!options_.gyro_bias_jacobians) {
    throw Error(ErrorCode::kInvalidArgument,
                "integrator built without gyro-bias Jacobians");
  }
  check(i);
  const auto [k, f] = locate(i);
  if (f == 0.0) return knots_[k].JR;
  return (1.0 - f) * knots_[k].JR + f * knots_[k + 1].JR;
}

Eigen::Matrix3d ScanlineIntegrator::accel_displacement_gyro_jacobian(
    std::int64_t i) const {
  if (!options_.gyro_bias_jacobians) {
    throw Error(ErrorCode::kInvalidArgument,
                "integrator built without gyro-bias Jacobians");
  }
  check(i);
  const auto [k, f] = locate(i);
  if (f == 0.0) return knots_[k].DG;
  return (1.0 - f) * knots_[k].DG + f * knots_[k + 1].DG;
}

Eigen::Vector3d ScanlineIntegrator::translation(
    std::int64_t i, const Eigen::Vector3d& v0,
    const Eigen::Vector3d& g0) const {
  const auto fi = static_cast<double>(i);
  return fi * dt_ * v0 + (0.5 * fi * fi * dt_ * dt_) * g0 +
         accel_displacement(i);
}

Pose ScanlineIntegrator::pose(std::int64_t i, const Eigen::Vector3d& v0,
                              const Eigen::Vector3d& g0) const {
  return Pose{rotation(i), translation(i, v0, g0)};
}

// ---------------------------------------------------------------------------

const CameraModel& RigCalibration::camera(int cam_id) const {
  if (cam_id < 0 || cam_id >= static_cast<int>(cameras.size())) {
    throw Error(ErrorCode::kOutOfRange,
                "unknown camera id " + std::to_string(cam_id));
  }
  return cameras[static_cast<std::size_t>(cam_id)];
}

void RigCalibration::validate() const {
  if (cameras.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "calibration has no cameras");
  }
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    const auto& cam = cameras[c];
    const auto& K = cam.K;
    const bool upper = K(1, 0) == 0.0 && K(2, 0) == 0.0 && K(2, 1) == 0.0 &&
                       std::abs(K(2, 2) - 1.0) < 1e-12;
    if (!upper || !(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "camera " + std::to_string(c) +
                      ": K must be upper triangular with positive focals");
    }
    if (!so3::is_rotation(cam.R_cam_imu, 1e-6)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "camera " + std::to_string(c) +
                      ": R_cam_imu is not a rotation");
    }
    if (!cam.t_cam_imu.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "camera " + std::to_string(c) + ": t_cam_imu not finite");
    }
  }
  if (!(readout_per_line > 0.0) || image_height <= 0 || !(fps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "readout_per_line, image_height and fps must be positive");
  }
  if (readout_per_line * image_height > 1.0 / fps * (1.0 + 1e-9)) {
    throw Error(ErrorCode::kInvalidArgument,
                "frame readout exceeds the frame period");
  }
}

std::int64_t Geometry::scanline_index(int frame, int row) const {
  if (row < 0 || row >= calib.image_height) {
    throw Error(ErrorCode::kOutOfRange,
                "row " + std::to_string(row) + " outside image");
  }
  if (frame < 0) {
    throw Error(ErrorCode::kOutOfRange, "negative frame index");
  }
  const int effective_row =
      shutter == ShutterModel::kGlobalOnRolling ? calib.image_height / 2 : row;
  const double t = static_cast<double>(frame) / calib.fps +
                   effective_row * calib.readout_per_line;
  return std::llround(t / integrator->dt());
}

Eigen::Matrix3d Geometry::rotation(std::int64_t i) const {
  Eigen::Matrix3d R = integrator->rotation(i);
  if (!jitter.empty()) {
    if (auto it = jitter.find(i); it != jitter.end()) R = it->second * R;
  }
  return R;
}

Observation Geometry::locate(Observation obs) const {
  calib.camera(obs.cam_id);
  obs.scanline = scanline_index(obs.frame, obs.row);
  if (!integrator->covers(obs.scanline)) {
    throw Error(ErrorCode::kOutOfRange,
                "observation at frame " + std::to_string(obs.frame) +
                    " row " + std::to_string(obs.row) +
                    " is outside the IMU stream");
  }
  return obs;
}

Pose scanline_pose(const ScanlineIntegrator& integrator,
                   const RigCalibration& calib, int frame, int row,
                   const Eigen::Vector3d& v0, const Eigen::Vector3d& g0,
                   ShutterModel shutter) {
  if (row < 0 || row >= calib.image_height) {
    throw Error(ErrorCode::kOutOfRange, "row outside image");
  }
  const int effective_row =
      shutter == ShutterModel::kGlobalOnRolling ? calib.image_height / 2 : row;
  const double t = static_cast<double>(frame) / calib.fps +
                   effective_row * calib.readout_per_line;
  const std::int64_t i = std::llround(t / integrator.dt());
  if (!integrator.covers(i)) {
    throw Error(ErrorCode::kOutOfRange,
                "scanline timestamp outside IMU coverage");
  }
  return integrator.pose(i, v0, g0);
}

Eigen::Vector3d raw_ray(const Observation& obs, const RigCalibration& calib,
                        const Eigen::Matrix3d& R_i0) {
  const CameraModel& cam = calib.camera(obs.cam_id);
  return R_i0 * cam.R_cam_imu * cam.K.inverse() * obs.u;
}

Eigen::Vector3d calibrated_ray(const Observation& obs,
                               const RigCalibration& calib,
                               const Eigen::Matrix3d& R_i0) {
  const Eigen::Vector3d p = raw_ray(obs, calib, R_i0);
  if (std::abs(p.z()) <= kMinRayDepth * p.norm()) {
    throw Error(ErrorCode::kDegenerateRay,
                "ray parallel to the normalization plane");
  }
  return p / p.z();
}

}  // namespace rsvio
