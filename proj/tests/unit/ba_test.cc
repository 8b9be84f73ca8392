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

#include "rsvio/ba.h"

#include <gtest/gtest.h>

#include "oracles.h"
#include "rsvio/error.h"
#include "rsvio/pipeline.h"
#include "rsvio/synth.h"

namespace rsvio {
namespace {

TEST(ReprojectionTest, JacobiansMatchFiniteDifferences) {
  for (std::uint64_t k = 0; k < 6; ++k) {
    const testing::RandomProblem rp = testing::make_random_problem(k, 0.2);
    const BaProblem pb = make_ba_problem(rp.problem.full, rp.problem.geometry);
    for (std::size_t r = 0; r < pb.observations.size(); r += 37) {
      const Observation& obs =
          rp.problem.full->correspondences().observations[pb.observations[r]];
      const Eigen::Vector3d X =
          rp.scenario.points[pb.track_of_point[pb.point_of[r]]];
      const Projection pr = reproject_with_jacobians(
          X, rp.scenario.v0, rp.scenario.g0, obs, pb.geometry);
      Eigen::VectorXd x(9);
      x << rp.scenario.v0, rp.scenario.g0, X;
      auto f = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        return reproject(z.tail<3>(), z.head<3>(), z.segment<3>(3), obs,
                         pb.geometry);
      };
      const Eigen::MatrixXd num = testing::central_difference(f, x, 1e-6);
      EXPECT_LT(testing::relative_error(pr.d_state, num.leftCols(6)), 1e-5);
      EXPECT_LT(testing::relative_error(pr.d_point, num.rightCols(3)), 1e-5);
      EXPECT_LT((pr.u - f(x)).norm(), 1e-12);
    }
  }
}

TEST(ReprojectionTest, NoiselessPointsReprojectExactly) {
  const Scenario sc = generate_scenario({}, ScenarioConfig{});
  PipelineOptions o;
  o.frames = 5;
  const Problem p = prepare(sc.imu, sc.calib, sc.tracks, o);
  const BaProblem pb = make_ba_problem(p.full, p.geometry);
  const auto points = init_points(pb, sc.v0, sc.g0);
  const CorrespondenceSet& c = p.full->correspondences();
  for (std::size_t r = 0; r < pb.observations.size(); ++r) {
    const Observation& obs = c.observations[pb.observations[r]];
    EXPECT_LT((reproject(points[pb.point_of[r]], sc.v0, sc.g0, obs, p.geometry) -
               obs.u.head<2>())
                  .norm(),
              1e-7);
  }
}

TEST(ReprojectionTest, PointBehindCameraThrows) {
  const testing::RandomProblem rp = testing::make_random_problem(0, 0.0);
  const Observation& obs = rp.problem.full->correspondences().observations[0];
  try {
    reproject(Eigen::Vector3d(0, 0, -5), rp.scenario.v0, rp.scenario.g0, obs,
              rp.problem.geometry);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCheirality);
  }
}

TEST(BundleAdjustmentTest, ConvergesFromPerturbedStart) {
  ScenarioConfig cfg;
  cfg.sigma_px = 0.0;
  cfg.accel_noise = 0.0;
  cfg.rot_noise_deg = 0.0;
  const Scenario sc = generate_scenario({}, cfg);
  PipelineOptions o;
  o.frames = 5;
  const Problem p = prepare(sc.imu, sc.calib, sc.tracks, o);
  InitEstimate init;
  init.v0 = sc.v0 + Eigen::Vector3d(0.05, -0.03, 0.04);
  init.g0 = sc.g0 + Eigen::Vector3d(0.2, 0.1, -0.15);
  const BaResult r = refine_lm(make_ba_problem(p.full, p.geometry), init);
  EXPECT_TRUE(r.estimate.converged);
  EXPECT_LT((r.estimate.v0 - sc.v0).norm(), 1e-6);
  EXPECT_LT((r.estimate.g0 - sc.g0).norm(), 1e-5);
  EXPECT_LT(r.final_cost, r.initial_cost);
  double last = r.initial_cost;
  for (const BaTraceEntry& t : r.trace) {
    if (!t.accepted) continue;
    EXPECT_LE(t.cost, last);
    last = t.cost;
  }
}

TEST(BundleAdjustmentTest, NoisyRefinementReportsCovariance) {
  ScenarioConfig cfg;
  cfg.sigma_px = 0.3;
  const Scenario sc = generate_scenario({}, cfg);
  const NoisyData nd = perturb(sc, cfg, 9);
  PipelineOptions o;
  o.frames = 5;
  const Problem p = prepare(nd.imu, sc.calib, nd.tracks, o, nd.jitter);
  const SolveOutput out = solve(p, Method::kBa, o);
  EXPECT_EQ(out.estimate.method, Method::kBa);
  ASSERT_TRUE(out.estimate.has_covariance());
  EXPECT_EQ(out.estimate.cov.rows(), 6);
  EXPECT_NEAR(out.estimate.sigma_hat, 0.3, 0.1);
  EXPECT_FALSE(out.trace.empty());
  EXPECT_GE(out.estimate.iterations, 1);
}

}  // namespace
}  // namespace rsvio
