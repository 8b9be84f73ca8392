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

// End-to-end problem setup: IMU + calibration + tracks -> reduced system and
// row covariances, then any of the estimators.

#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "rsvio/ba.h"
#include "rsvio/bias.h"
#include "rsvio/estimators.h"
#include "rsvio/noise.h"
#include "rsvio/ransac.h"
#include "rsvio/system.h"

namespace rsvio {

struct PipelineOptions {
  PairPattern pairing = PairPattern::kDense;
  CameraSetup camera = CameraSetup::kStereo;
  ShutterModel shutter = ShutterModel::kRolling;
  IntegrationMode integration = IntegrationMode::kInterpolateThenIntegrate;
  BiasConfig bias;
  /// Number of frames to pair; 0 uses every frame present in the tracks.
  int frames = 0;
  CorrespondenceOptions correspondence;
  std::optional<RansacOptions> ransac;
  PointNoiseModel noise;
  RenormOptions renorm;
  BaOptions ba;
  /// Estimator whose result seeds bundle adjustment.
  Method ba_init = Method::kLs;
};

struct Problem {
  Geometry geometry;
  std::shared_ptr<const FullSystem> full;
  std::shared_ptr<const ReducedSystem> reduced;
  RowCovariances covs;
  /// Pairs kept by RANSAC, as indices of the unpruned set (empty without it).
  std::vector<int> ransac_inliers;
  int input_pairs = 0;
};

Problem prepare(const ImuStream& imu, const RigCalibration& calib,
                const TrackSet& tracks, const PipelineOptions& opts,
                const RotationJitter& jitter = {});

struct SolveOutput {
  InitEstimate estimate;
  std::vector<BaTraceEntry> trace;  // bundle adjustment only
};

SolveOutput solve(const Problem& problem, Method method,
                  const PipelineOptions& opts);

/// Solves with several methods, reusing the seed estimate for BA when it is
/// also requested.
std::vector<SolveOutput> solve_all(const Problem& problem,
                                   const std::vector<Method>& methods,
                                   const PipelineOptions& opts);

}  // namespace rsvio
