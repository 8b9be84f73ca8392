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

#include "rsvio/bias.h"

#include <gtest/gtest.h>

#include "oracles.h"
#include "rsvio/error.h"
#include "rsvio/pipeline.h"
#include "rsvio/synth.h"

namespace rsvio {
namespace {

TrajectorySpec rotating() {
  TrajectorySpec t;
  t.kind = TrajectoryKind::kLoop;
  return t;
}

TEST(BiasTest, NoBiasColumnsMatchPlainAssembly) {
  const testing::RandomProblem rp = testing::make_random_problem(0, 0.2);
  const CorrespondenceSet& c = rp.problem.full->correspondences();
  const FullSystem a = assemble(c, rp.problem.geometry);
  const FullSystem b = assemble_with_bias(c, rp.problem.geometry, {});
  EXPECT_EQ((a.S() - b.S()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BiasTest, AccelBiasColumnsAreCoefficientDifferences) {
  ScenarioConfig cfg = testing::pixel_noise_only(0.0);
  const Scenario sc = generate_scenario(rotating(), cfg);
  PipelineOptions o;
  o.frames = cfg.frames;
  o.bias.model_accel = true;
  const Problem p = prepare(sc.imu, sc.calib, sc.tracks, o);
  ASSERT_EQ(p.full->layout().cols(), 10);
  const CorrespondenceSet& c = p.full->correspondences();
  const Correspondence& pr = c.pairs[11];
  const Eigen::Matrix3d Z =
      accel_bias_columns(*p.geometry.integrator, c.observations[pr.a].scanline,
                         c.observations[pr.b].scanline);
  EXPECT_LT((p.full->S().block<3, 3>(33, 6) - Z).norm(), 1e-15);
}

TEST(BiasTest, NoiselessAccelBiasIsRecovered) {
  ScenarioConfig cfg = testing::pixel_noise_only(0.0);
  cfg.accel_bias = Eigen::Vector3d(0.08, -0.05, 0.12);
  const Scenario sc = generate_scenario(rotating(), cfg);
  const NoisyData nd = perturb(sc, cfg, 1);
  PipelineOptions o;
  o.frames = cfg.frames;
  o.bias.model_accel = true;
  const Problem p = prepare(nd.imu, sc.calib, nd.tracks, o, nd.jitter);
  for (Method m : {Method::kLs, Method::kRenorm}) {
    const InitEstimate e = solve(p, m, o).estimate;
    ASSERT_TRUE(e.accel_bias.has_value());
    EXPECT_LT((*e.accel_bias - cfg.accel_bias).norm(),
              1e-6 * cfg.accel_bias.norm());
    EXPECT_LT((e.v0 - sc.v0).norm(), 1e-7);
  }
}

TEST(BiasTest, GyroLinearizationResidualIsSecondOrder) {
  const ScenarioConfig cfg = testing::pixel_noise_only(0.0);
  const Scenario sc = generate_scenario(rotating(), cfg);
  const Eigen::Vector3d e(0.02, -0.015, 0.01);
  const double r1 = testing::kappa_prediction_residual(sc, e);
  const double r2 = testing::kappa_prediction_residual(sc, 0.5 * e);
  const double r4 = testing::kappa_prediction_residual(sc, 0.25 * e);
  EXPECT_GT(r1, 0.0);
  EXPECT_NEAR(r1 / r2, 4.0, 0.4);
  EXPECT_NEAR(r2 / r4, 4.0, 0.4);
}

TEST(BiasTest, GyroBiasModelReducesVelocityError) {
  ScenarioConfig cfg = testing::pixel_noise_only(0.0);
  cfg.gyro_bias = Eigen::Vector3d(0.01, -0.008, 0.006);
  const Scenario sc = generate_scenario(rotating(), cfg);
  const NoisyData nd = perturb(sc, cfg, 1);
  PipelineOptions plain;
  plain.frames = cfg.frames;
  PipelineOptions modeled = plain;
  modeled.bias.model_gyro = true;
  const Problem a = prepare(nd.imu, sc.calib, nd.tracks, plain, nd.jitter);
  const Problem b = prepare(nd.imu, sc.calib, nd.tracks, modeled, nd.jitter);
  const InitEstimate ea = solve(a, Method::kLs, plain).estimate;
  const InitEstimate eb = solve(b, Method::kLs, modeled).estimate;
  ASSERT_TRUE(eb.gyro_bias.has_value());
  EXPECT_LT((eb.v0 - sc.v0).norm(), 0.1 * (ea.v0 - sc.v0).norm());
  EXPECT_LT((*eb.gyro_bias - cfg.gyro_bias).norm(),
            0.1 * cfg.gyro_bias.norm());
}

TEST(BiasTest, GyroJacobiansNeedIntegratorSupport) {
  const testing::RandomProblem rp = testing::make_random_problem(0, 0.0);
  const CorrespondenceSet& c = rp.problem.full->correspondences();
  EXPECT_THROW(gyro_bias_jacobians(rp.problem.geometry, c.observations[0]),
               Error);
}

}  // namespace
}  // namespace rsvio
