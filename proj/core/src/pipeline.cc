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

#include "rsvio/pipeline.h"

#include <algorithm>

#include "rsvio/error.h"

namespace rsvio {
namespace {

int frame_count(const TrackSet& tracks) {
  int frames = 0;
  for (const Track& t : tracks.tracks) {
    for (const Observation& o : t.observations) {
      frames = std::max(frames, o.frame + 1);
    }
  }
  return frames;
}

InitEstimate run_linear(const Problem& p, Method method,
                        const PipelineOptions& opts) {
  const ColumnLayout& layout = p.full->layout();
  const Eigen::MatrixXd& B = p.reduced->B();
  switch (method) {
    case Method::kLs: return solve_ls(B, layout);
    case Method::kTaubin: return solve_taubin(B, p.covs, layout);
    case Method::kIterReweight:
      return solve_iter_reweight(B, p.covs, layout, opts.renorm);
    case Method::kRenorm: return solve_renorm(B, p.covs, layout, opts.renorm);
    case Method::kBa: break;
  }
  throw Error(ErrorCode::kInvalidArgument, "not a linear method");
}

SolveOutput run_ba(const Problem& p, const InitEstimate& seed,
                   const PipelineOptions& opts) {
  const BaProblem pb = make_ba_problem(p.full, p.geometry);
  BaResult res = refine_lm(pb, seed, opts.ba);
  return {std::move(res.estimate), std::move(res.trace)};
}

}  // namespace

Problem prepare(const ImuStream& imu, const RigCalibration& calib,
                const TrackSet& tracks, const PipelineOptions& opts,
                const RotationJitter& jitter) {
  imu.validate();
  calib.validate();
  if (opts.camera == CameraSetup::kStereo && calib.cameras.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "stereo pairing needs two cameras in the calibration");
  }
  ScanlineIntegrator::Options iopts;
  iopts.mode = opts.integration;
  iopts.gyro_bias_jacobians = opts.bias.model_gyro;

  Problem p;
  p.geometry.calib = calib;
  p.geometry.integrator = std::make_shared<const ScanlineIntegrator>(
      imu, calib.readout_per_line, iopts);
  p.geometry.shutter = opts.shutter;
  p.geometry.jitter = jitter;

  const int frames = opts.frames > 0 ? opts.frames : frame_count(tracks);
  if (frame_count(tracks) == 0) {
    throw Error(ErrorCode::kInsufficientData,
                "need >= 6 correspondences, got 0");
  }
  const Pairing pairing = make_pairing(frames, opts.pairing, opts.camera);
  CorrespondenceSet corrs =
      build_correspondences(tracks, pairing, p.geometry, opts.correspondence);
  p.input_pairs = corrs.pair_count();
  if (corrs.pair_count() < 1) {
    throw Error(ErrorCode::kInsufficientData,
                "need >= 6 correspondences, got 0");
  }
  if (opts.ransac) {
    RansacResult rr = ransac_prune(corrs, p.geometry, *opts.ransac);
    corrs = std::move(rr.inliers);
    p.ransac_inliers = std::move(rr.inlier_pairs);
  }
  p.full = std::make_shared<const FullSystem>(
      assemble_with_bias(corrs, p.geometry, opts.bias));
  p.reduced = std::make_shared<const ReducedSystem>(p.full);
  PointNoiseModel noise = opts.noise;
  if (!noise.per_observation.empty() &&
      noise.per_observation.size() !=
          static_cast<std::size_t>(corrs.observation_count())) {
    noise.per_observation.clear();
  }
  p.covs = propagate(*p.reduced, noise);
  return p;
}

SolveOutput solve(const Problem& problem, Method method,
                  const PipelineOptions& opts) {
  if (method != Method::kBa) return {run_linear(problem, method, opts), {}};
  const InitEstimate seed = run_linear(problem, opts.ba_init, opts);
  return run_ba(problem, seed, opts);
}

std::vector<SolveOutput> solve_all(const Problem& problem,
                                   const std::vector<Method>& methods,
                                   const PipelineOptions& opts) {
  std::vector<SolveOutput> out;
  std::optional<InitEstimate> seed;
  for (Method m : methods) {
    if (m == Method::kBa) continue;
    out.push_back({run_linear(problem, m, opts), {}});
    if (m == opts.ba_init) seed = out.back().estimate;
  }
  std::vector<SolveOutput> ordered;
  std::size_t k = 0;
  for (Method m : methods) {
    if (m != Method::kBa) {
      ordered.push_back(std::move(out[k++]));
      continue;
    }
    if (!seed) seed = run_linear(problem, opts.ba_init, opts);
    ordered.push_back(run_ba(problem, *seed, opts));
  }
  return ordered;
}

}  // namespace rsvio
