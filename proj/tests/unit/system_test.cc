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

#include "rsvio/system.h"

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "oracles.h"
#include "rsvio/error.h"
#include "rsvio/pipeline.h"
#include "rsvio/synth.h"

namespace rsvio {
namespace {

Eigen::VectorXd truth_vector(const Scenario& sc) {
  Eigen::VectorXd y(7);
  y << sc.v0, sc.g0, 1.0;
  return y;
}

Problem noiseless_problem(const Scenario& sc, PipelineOptions opts = {}) {
  opts.frames = 5;
  return prepare(sc.imu, sc.calib, sc.tracks, opts);
}

const Scenario& forward_scene() {
  static const Scenario sc = generate_scenario({}, ScenarioConfig{});
  return sc;
}

TEST(PairingTest, Counts) {
  EXPECT_EQ(make_pairing(5, PairPattern::kDense, CameraSetup::kStereo).size(),
            10u);
  EXPECT_EQ(make_pairing(5, PairPattern::kDense, CameraSetup::kMono).size(),
            10u);
  EXPECT_EQ(
      make_pairing(5, PairPattern::kFirstAnchor, CameraSetup::kMono).size(),
      4u);
  const Pairing p = make_pairing(3, PairPattern::kDense, CameraSetup::kStereo);
  for (const auto& [a, b] : p) {
    EXPECT_EQ(a.cam_id, 0);
    EXPECT_EQ(b.cam_id, 1);
    EXPECT_LT(a.frame, b.frame);
  }
}

TEST(SystemTest, DenseStereoSizes) {
  const Problem p = noiseless_problem(forward_scene());
  EXPECT_EQ(p.full->pair_count(), 500);
  EXPECT_EQ(p.full->lambda_count(), 400);
  EXPECT_EQ(p.full->blocks().size(), 50u);
  EXPECT_EQ(p.reduced->B().rows(), 1500);
  EXPECT_EQ(p.reduced->B().cols(), 7);
}

TEST(SystemTest, NoiselessTruthIsInNullSpace) {
  const Scenario& sc = forward_scene();
  const Problem p = noiseless_problem(sc);
  const Eigen::VectorXd y = truth_vector(sc);
  EXPECT_LT((p.reduced->B() * y).norm(), 1e-10);
  const DepthEstimate d = recover_depths(*p.full, y);
  Eigen::VectorXd z(7 + d.lambda.size());
  z << y, d.lambda;
  EXPECT_LT((p.full->dense_SP() * z).norm(), 1e-10);
  EXPECT_TRUE(d.negative_tracks.empty());
  EXPECT_GT(d.lambda.minCoeff(), 0.5);
}

TEST(SystemTest, ReducedMatchesDenseProjector) {
  const testing::RandomProblem rp = testing::make_random_problem(1, 0.5);
  const ReducedSystem& red = *rp.problem.reduced;
  const Eigen::MatrixXd P = red.full().dense_P();
  const Eigen::MatrixXd G =
      P * (P.transpose() * P).inverse() * P.transpose();
  EXPECT_LT((red.dense_G() - G).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((G * G - G).cwiseAbs().maxCoeff(), 1e-10);
  const Eigen::MatrixXd B =
      (Eigen::MatrixXd::Identity(G.rows(), G.cols()) - G) * red.full().S();
  EXPECT_LT(testing::relative_error(red.B(), B), 1e-10);
}

TEST(SystemTest, ReductionPreservesAffineMinimizerProperty) {
  for (std::uint64_t k = 0; k < 12; ++k) {
    const testing::RandomProblem rp = testing::make_random_problem(k, 0.5);
    const Eigen::VectorXd full =
        testing::full_system_affine_solution(*rp.problem.full);
    const Eigen::VectorXd red = solve_reduced_affine(rp.problem.reduced->B());
    EXPECT_LT((red.head(6) - full).norm() / full.norm(), 1e-9) << k;
    EXPECT_DOUBLE_EQ(red(6), 1.0);
  }
}

TEST(SystemTest, PairCoefficientsReproduceRelativeMotion) {
  const Scenario& sc = forward_scene();
  const Problem p = noiseless_problem(sc);
  const CorrespondenceSet& c = p.full->correspondences();
  const Correspondence& pr = c.pairs[17];
  const PairCoefficients k =
      pair_coefficients(p.geometry, c.observations[pr.a], c.observations[pr.b]);
  const auto& integ = *p.geometry.integrator;
  const Observation& a = c.observations[pr.a];
  const Observation& b = c.observations[pr.b];
  const Eigen::Vector3d ca =
      integ.translation(a.scanline, sc.v0, sc.g0) +
      integ.rotation(a.scanline) * sc.calib.camera(a.cam_id).t_cam_imu;
  const Eigen::Vector3d cb =
      integ.translation(b.scanline, sc.v0, sc.g0) +
      integ.rotation(b.scanline) * sc.calib.camera(b.cam_id).t_cam_imu;
  EXPECT_LT((k.xi * sc.v0 + k.mu * sc.g0 + k.kappa - (ca - cb)).norm(), 1e-12);
}

TEST(SystemTest, InsufficientDataThrows) {
  const Scenario& sc = forward_scene();
  TrackSet few;
  few.tracks.assign(sc.tracks.tracks.begin(), sc.tracks.tracks.begin() + 1);
  PipelineOptions o;
  o.frames = 2;
  try {
    prepare(sc.imu, sc.calib, few, o);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(SystemTest, SelectPairsKeepsReferencedObservations) {
  const Problem p = noiseless_problem(forward_scene());
  const CorrespondenceSet& c = p.full->correspondences();
  const CorrespondenceSet s = select_pairs(c, {0, 1, 50, 499});
  EXPECT_EQ(s.pair_count(), 4);
  for (const Correspondence& pr : s.pairs) {
    ASSERT_LT(pr.a, s.observation_count());
    ASSERT_LT(pr.b, s.observation_count());
  }
  EXPECT_LT((s.rays[s.pairs[3].b] - c.rays[c.pairs[499].b]).norm(), 1e-15);
}

TEST(SystemTest, MinScanlineGapDropsClosePairs) {
  const Scenario& sc = forward_scene();
  PipelineOptions o;
  o.frames = 5;
  o.correspondence.min_scanline_gap = 1'000'000;
  EXPECT_THROW(prepare(sc.imu, sc.calib, sc.tracks, o), Error);
}

TEST(SystemTest, DegenerateTrackIsReported) {
  const Problem p = noiseless_problem(forward_scene());
  // Collapse one observation's ray onto zero so its depth column vanishes.
  const FullSystem broken = p.full->with_ray(3, Eigen::Vector3d::Zero());
  try {
    reduce(broken);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateTrack);
  }
}

}  // namespace
}  // namespace rsvio
