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

#include "rsvio/trajectory.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rsvio/error.h"

namespace rsvio {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// A sin(2 pi f t + phase) and its first two derivatives.
struct Wave {
  double value = 0.0;
  double rate = 0.0;
  double accel = 0.0;
};

Wave wave(double amplitude, double frequency, double phase, double t) {
  const double w = kTwoPi * frequency;
  const double s = std::sin(w * t + phase);
  const double c = std::cos(w * t + phase);
  return {amplitude * s, amplitude * w * c, -amplitude * w * w * s};
}

Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d R;
  R << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return R;
}

Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d R;
  R << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return R;
}

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d R;
  R << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return R;
}

void set_orientation(TrajectorySample& s, Wave yaw, Wave pitch, Wave roll) {
  const Eigen::Matrix3d Ry = rot_y(yaw.value);
  const Eigen::Matrix3d Rx = rot_x(pitch.value);
  const Eigen::Matrix3d Rz = rot_z(roll.value);
  s.R = Ry * Rx * Rz;
  s.omega = Rz.transpose() * Rx.transpose() * Eigen::Vector3d::UnitY() *
                yaw.rate +
            Rz.transpose() * Eigen::Vector3d::UnitX() * pitch.rate +
            Eigen::Vector3d::UnitZ() * roll.rate;
}

void add(TrajectorySample& s, int axis, const Wave& w) {
  s.p(axis) += w.value;
  s.v(axis) += w.rate;
  s.a(axis) += w.accel;
}

}  // namespace

const char* to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kStatic: return "static";
    case TrajectoryKind::kForward: return "forward";
    case TrajectoryKind::kLoop: return "loop";
    case TrajectoryKind::kShake: return "shake";
    case TrajectoryKind::kForwardBack: return "forward-back";
    case TrajectoryKind::kCustomSpline: return "custom-spline";
  }
  return "unknown";
}

TrajectoryKind parse_trajectory_kind(std::string_view name) {
  for (auto k : {TrajectoryKind::kStatic, TrajectoryKind::kForward,
                 TrajectoryKind::kLoop, TrajectoryKind::kShake,
                 TrajectoryKind::kForwardBack, TrajectoryKind::kCustomSpline}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown trajectory kind '" + std::string(name) + "'");
}

double trajectory_duration(const TrajectorySpec& spec) {
  if (spec.kind == TrajectoryKind::kCustomSpline) {
    return spec.waypoints.size() < 2
               ? 0.0
               : spec.waypoint_dt *
                     static_cast<double>(spec.waypoints.size() - 1);
  }
  if (spec.kind == TrajectoryKind::kStatic ||
      spec.kind == TrajectoryKind::kShake) {
    return spec.length / std::max(spec.mean_speed, 1e-3);
  }
  return spec.length / spec.mean_speed;
}

TrajectorySample sample_trajectory(const TrajectorySpec& spec, double t) {
  TrajectorySample s;
  if (spec.kind == TrajectoryKind::kStatic) return s;
  if (!(spec.mean_speed > 0.0) || !(spec.length > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "trajectory length and speed must be positive");
  }

  double heading = 0.0;
  double heading_rate = 0.0;
  double heading_accel = 0.0;
  const double sway = spec.sway_amplitude;
  double rot_scale = 1.0;
  double freq_scale = 1.0;

  switch (spec.kind) {
    case TrajectoryKind::kForward: {
      const double v = spec.mean_speed;
      s.p.z() = v * t;
      s.v.z() = v;
      add(s, 2, wave(0.1 * v / (kTwoPi * 0.4), 0.4, 0.0, t));
      add(s, 0, wave(sway, 0.35, 0.0, t));
      add(s, 1, wave(0.5 * sway, 0.5, 0.3, t));
      break;
    }
    case TrajectoryKind::kLoop: {
      const double r = spec.length / kTwoPi;
      const double w = spec.mean_speed / r;
      heading = w * t;
      heading_rate = w;
      s.p << r * (1.0 - std::cos(heading)), 0.0, r * std::sin(heading);
      s.v << r * w * std::sin(heading), 0.0, r * w * std::cos(heading);
      s.a << r * w * w * std::cos(heading), 0.0, -r * w * w * std::sin(heading);
      add(s, 1, wave(0.5 * sway, 0.5, 0.3, t));
      break;
    }
    case TrajectoryKind::kShake: {
      add(s, 0, wave(0.6 * sway, 1.7, 0.0, t));
      add(s, 1, wave(0.6 * sway, 2.3, 0.5, t));
      add(s, 2, wave(0.6 * sway, 1.1, 1.0, t));
      rot_scale = 1.5;
      freq_scale = 3.0;
      break;
    }
    case TrajectoryKind::kForwardBack: {
      const double period = 2.0 * spec.length / spec.mean_speed;
      const Wave w = wave(0.5 * spec.length, 1.0 / period,
                          -0.5 * std::numbers::pi, t);
      s.p.z() = 0.5 * spec.length + w.value;
      s.v.z() = w.rate;
      s.a.z() = w.accel;
      add(s, 0, wave(sway, 0.35, 0.0, t));
      break;
    }
    case TrajectoryKind::kCustomSpline: {
      const QuinticSpline spline(spec.waypoints, spec.waypoint_dt);
      spline.evaluate(t, &s.p, &s.v, &s.a);
      break;
    }
    case TrajectoryKind::kStatic:
      break;
  }

  Wave yaw = wave(rot_scale * spec.yaw_amplitude,
                  freq_scale * spec.yaw_frequency, 0.0, t);
  yaw.value += heading;
  yaw.rate += heading_rate;
  yaw.accel += heading_accel;
  const Wave pitch = wave(rot_scale * spec.pitch_amplitude,
                          freq_scale * spec.pitch_frequency, 0.7, t);
  const Wave roll = wave(rot_scale * spec.roll_amplitude,
                         freq_scale * spec.roll_frequency, 1.3, t);
  set_orientation(s, yaw, pitch, roll);
  return s;
}

QuinticSpline::QuinticSpline(std::vector<Eigen::Vector3d> points, double dt)
    : p_(std::move(points)), dt_(dt) {
  if (p_.size() < 2 || !(dt_ > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "spline needs >= 2 waypoints and a positive spacing");
  }
  const std::size_t n = p_.size();
  v_.assign(n, Eigen::Vector3d::Zero());
  a_.assign(n, Eigen::Vector3d::Zero());
  for (std::size_t k = 0; k < n; ++k) {
    if (k == 0) {
      v_[k] = (p_[1] - p_[0]) / dt_;
    } else if (k == n - 1) {
      v_[k] = (p_[k] - p_[k - 1]) / dt_;
    } else {
      v_[k] = (p_[k + 1] - p_[k - 1]) / (2.0 * dt_);
      a_[k] = (p_[k + 1] - 2.0 * p_[k] + p_[k - 1]) / (dt_ * dt_);
    }
  }
}

double QuinticSpline::duration() const {
  return dt_ * static_cast<double>(p_.size() - 1);
}

void QuinticSpline::evaluate(double t, Eigen::Vector3d* p, Eigen::Vector3d* v,
                             Eigen::Vector3d* a) const {
  t = std::clamp(t, 0.0, duration());
  auto seg = static_cast<std::size_t>(std::floor(t / dt_));
  seg = std::min(seg, p_.size() - 2);
  const double tau = t / dt_ - static_cast<double>(seg);
  const double h = dt_;
  const Eigen::Vector3d dp = p_[seg + 1] - p_[seg];
  const Eigen::Vector3d &v0 = v_[seg], &v1 = v_[seg + 1];
  const Eigen::Vector3d &a0 = a_[seg], &a1 = a_[seg + 1];
  const Eigen::Vector3d c[6] = {
      p_[seg],
      h * v0,
      0.5 * h * h * a0,
      10.0 * dp - 6.0 * h * v0 - 4.0 * h * v1 - 1.5 * h * h * a0 +
          0.5 * h * h * a1,
      -15.0 * dp + 8.0 * h * v0 + 7.0 * h * v1 + 1.5 * h * h * a0 -
          h * h * a1,
      6.0 * dp - 3.0 * h * v0 - 3.0 * h * v1 - 0.5 * h * h * a0 +
          0.5 * h * h * a1};
  Eigen::Vector3d P = Eigen::Vector3d::Zero();
  Eigen::Vector3d V = Eigen::Vector3d::Zero();
  Eigen::Vector3d A = Eigen::Vector3d::Zero();
  for (int k = 5; k >= 0; --k) P = P * tau + c[k];
  for (int k = 5; k >= 1; --k) V = V * tau + k * c[k];
  for (int k = 5; k >= 2; --k) A = A * tau + k * (k - 1) * c[k];
  if (p) *p = P;
  if (v) *v = V / h;
  if (a) *a = A / (h * h);
}

}  // namespace rsvio
