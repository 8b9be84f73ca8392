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

#include <benchmark/benchmark.h>

#include "rsvio/pipeline.h"
#include "rsvio/synth.h"

namespace rsvio {
namespace {

struct Fixture {
  Fixture() {
    cfg.sigma_px = 0.3;
    scene = generate_scenario({}, cfg);
    data = perturb(scene, cfg, 1);
    opts.frames = cfg.frames;
    problem = prepare(data.imu, scene.calib, data.tracks, opts, data.jitter);
  }
  ScenarioConfig cfg;
  Scenario scene;
  NoisyData data;
  PipelineOptions opts;
  Problem problem;
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Prepare(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        prepare(f.data.imu, f.scene.calib, f.data.tracks, f.opts, f.data.jitter));
  }
}
BENCHMARK(BM_Prepare)->Unit(benchmark::kMillisecond);

void BM_Propagate(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(propagate(*f.problem.reduced, f.opts.noise));
  }
}
BENCHMARK(BM_Propagate)->Unit(benchmark::kMillisecond);

void BM_Solve(benchmark::State& state) {
  const Fixture& f = fixture();
  const Method m = static_cast<Method>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(f.problem, m, f.opts));
  }
  state.SetLabel(to_string(m));
}
BENCHMARK(BM_Solve)
    ->Arg(static_cast<int>(Method::kLs))
    ->Arg(static_cast<int>(Method::kTaubin))
    ->Arg(static_cast<int>(Method::kRenorm))
    ->Arg(static_cast<int>(Method::kBa))
    ->Unit(benchmark::kMillisecond);

void BM_Ransac(benchmark::State& state) {
  const Fixture& f = fixture();
  const CorrespondenceSet& corrs = f.problem.full->correspondences();
  for (auto _ : state) {
    benchmark::DoNotOptimize(ransac_prune(corrs, f.problem.geometry));
  }
}
BENCHMARK(BM_Ransac)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace rsvio

BENCHMARK_MAIN();
