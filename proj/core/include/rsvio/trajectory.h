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

#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace rsvio {

enum class TrajectoryKind {
  kStatic,
  kForward,
  kLoop,
  kShake,
  kForwardBack,
  kCustomSpline,
};

const char* to_string(TrajectoryKind kind);
TrajectoryKind parse_trajectory_kind(std::string_view name);

/// Analytic rig motion in a world frame with y pointing down (gravity +y).
/// Orientation is R = Ry(yaw) Rx(pitch) Rz(roll) with sinusoidal angles.
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kForward;
  double length = 9.0;       // m
  double mean_speed = 0.7;   // m/s
  double yaw_amplitude = 0.35;    // rad
  double yaw_frequency = 0.6;     // Hz
  double pitch_amplitude = 0.12;  // rad
  double pitch_frequency = 0.9;   // Hz
  double roll_amplitude = 0.05;   // rad
  double roll_frequency = 1.3;    // Hz
  double sway_amplitude = 0.05;   // m, lateral and vertical wobble
  /// Waypoints for kCustomSpline, visited every waypoint_dt seconds.
  std::vector<Eigen::Vector3d> waypoints;
  double waypoint_dt = 1.0;
};

struct TrajectorySample {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();      // position (world)
  Eigen::Vector3d v = Eigen::Vector3d::Zero();      // velocity (world)
  Eigen::Vector3d a = Eigen::Vector3d::Zero();      // acceleration (world)
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();  // body -> world
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // body angular rate
};

/// Exact position derivatives and body rate of the trajectory at time t.
TrajectorySample sample_trajectory(const TrajectorySpec& spec, double t);

/// Duration over which the trajectory is defined (length / mean_speed, or the
/// waypoint span for splines).
double trajectory_duration(const TrajectorySpec& spec);

/// C2 piecewise-quintic interpolation of waypoints at uniform spacing; knot
/// velocities and accelerations come from central differences.
class QuinticSpline {
 public:
  QuinticSpline(std::vector<Eigen::Vector3d> points, double dt);

  double duration() const;
  /// Position, velocity and acceleration at t (clamped to the span).
  void evaluate(double t, Eigen::Vector3d* p, Eigen::Vector3d* v,
                Eigen::Vector3d* a) const;

 private:
  std::vector<Eigen::Vector3d> p_, v_, a_;
  double dt_;
};

}  // namespace rsvio
