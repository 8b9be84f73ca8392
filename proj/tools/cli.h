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

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rsvio/estimators.h"
#include "rsvio/monte_carlo.h"
#include "rsvio/synth.h"
#include "rsvio/trajectory.h"

namespace rsvio::cli {

enum ExitCode { kOk = 0, kInputError = 1, kDiverged = 2 };

/// One configuration of a named experiment.
struct Variant {
  std::string name;
  ScenarioConfig scenario;
  std::vector<Method> methods;
};

struct Preset {
  std::string id;    // "paper-fig3" ...
  std::string plot;  // "fig3" ...
  TrajectorySpec trajectory;
  std::vector<double> sigmas;
  int trials = 100;
  std::vector<Variant> variants;
};

std::vector<std::string> preset_names();
/// Throws Error(kInvalidArgument) for unknown names.
Preset find_preset(const std::string& name);

struct SimulateConfig {
  TrajectorySpec trajectory;
  ScenarioConfig scenario;
  int window = 0;
  std::string out_dir = ".";
};

struct SolveConfig {
  std::string imu_path, tracks_path, calib_path;
  std::vector<Method> methods = {Method::kRenorm};
  std::optional<PairPattern> pairing;
  std::optional<CameraSetup> camera;
  ShutterModel shutter = ShutterModel::kRolling;
  std::optional<int> frames;
  bool model_accel_bias = false;
  bool model_gyro_bias = false;
  bool ransac = true;
  int ransac_refit = 0;  // consensus refit rounds
  std::string out_path;  // empty: standard output
  std::string trace_path;
  std::string jacobian_path;
};

struct BenchmarkConfig {
  Preset preset;
  int jobs = 0;
  int windows = 1;
  double outlier_fraction = 0.0;
  bool ransac = false;
  int ransac_refit = 0;
  std::string out_dir = ".";
};

struct CompareConfig {
  std::string estimate_path, gt_path;
  std::string out_path;
};

int cmd_simulate(const SimulateConfig& cfg, std::ostream& log);
int cmd_solve(const SolveConfig& cfg, std::ostream& log);
int cmd_benchmark(const BenchmarkConfig& cfg, std::ostream& log);
int cmd_compare(const CompareConfig& cfg, std::ostream& log);

/// Logs to standard error at warn level unless RSVIO_LOG says otherwise.
void init_logging();

/// Parses arguments and dispatches; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace rsvio::cli
