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

// File formats. Readers throw Error(kParse) with "<name>:<line>:<column>: "
// prefixed messages; writers emit full double precision so round trips are
// exact.
//
//   IMU CSV        t,wx,wy,wz,ax,ay,az  (header required, uniform t)
//   calibration    {"cameras": [{"K": [9], "R_cam_imu": [9], "t_cam_imu": [3]}],
//                   "readout_per_line", "image_height", "image_width", "fps"}
//   tracks         {"pairing": "dense", "camera": "stereo", "frames": 5,
//                   "tracks": [{"id", "observations":
//                              [{"cam_id", "frame", "row", "u": [x, y]}]}]}
//   estimate       {"method", "v0", "g0", "cov" (row-major 36 or []),
//                   "sigma_hat", "iterations", "converged"}
//   ground truth   {"v0", "g0", "window", "t_start", "points"}

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rsvio/ba.h"
#include "rsvio/estimators.h"
#include "rsvio/geometry.h"
#include "rsvio/monte_carlo.h"
#include "rsvio/noise.h"
#include "rsvio/synth.h"
#include "rsvio/system.h"

namespace rsvio::io {

ImuStream read_imu_csv(std::istream& in, const std::string& name = "imu");
void write_imu_csv(std::ostream& out, const ImuStream& imu);

RigCalibration read_calibration(std::istream& in,
                                const std::string& name = "calibration");
void write_calibration(std::ostream& out, const RigCalibration& calib);

struct TrackFile {
  TrackSet tracks;
  std::optional<PairPattern> pairing;
  std::optional<CameraSetup> camera;
  std::optional<int> frames;
};

TrackFile read_tracks(std::istream& in, const std::string& name = "tracks");
void write_tracks(std::ostream& out, const TrackFile& tracks);

struct GroundTruth {
  Eigen::Vector3d v0 = Eigen::Vector3d::Zero();
  Eigen::Vector3d g0 = Eigen::Vector3d::Zero();
  int window = 0;
  double t_start = 0.0;
  std::vector<Eigen::Vector3d> points;
};

GroundTruth ground_truth(const Scenario& scenario);
GroundTruth read_ground_truth(std::istream& in,
                              const std::string& name = "ground truth");
void write_ground_truth(std::ostream& out, const GroundTruth& gt);

/// A single estimate is written as an object, several as an array.
void write_estimates(std::ostream& out, const std::vector<InitEstimate>& est);
/// Accepts either layout.
std::vector<InitEstimate> read_estimates(std::istream& in,
                                         const std::string& name = "estimate");

void write_trials_csv(std::ostream& out, const std::vector<TrialResult>& trials);
void write_aggregate_csv(std::ostream& out, const std::vector<Aggregate>& agg);
void write_trace_csv(std::ostream& out, const std::vector<BaTraceEntry>& trace);
/// Long format: pair,s,param,column,value for every J^(s) entry.
void write_jacobian_csv(std::ostream& out, const RowCovariances& covs);

std::string to_string(PairPattern p);
std::string to_string(CameraSetup c);
std::string to_string(ShutterModel s);
PairPattern parse_pairing(const std::string& s);
CameraSetup parse_camera(const std::string& s);
ShutterModel parse_shutter(const std::string& s);

}  // namespace rsvio::io
