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

#include "rsvio/synth.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rsvio/error.h"
#include "rsvio/so3.h"

namespace rsvio {
namespace {

TEST(RigTest, StereoBaseline) {
  ScenarioConfig cfg;
  const RigCalibration rig = make_rig(cfg);
  ASSERT_EQ(rig.cameras.size(), 2u);
  EXPECT_NEAR((rig.cameras[0].t_cam_imu - rig.cameras[1].t_cam_imu).norm(),
              cfg.baseline, 1e-15);
  EXPECT_DOUBLE_EQ(rig.cameras[0].focal(), cfg.focal);
  EXPECT_DOUBLE_EQ(rig.readout_per_line * rig.image_height, 0.01);
}

TEST(ScenarioTest, ForwardSceneLayout) {
  ScenarioConfig cfg;
  const Scenario sc = generate_scenario({}, cfg);
  EXPECT_EQ(sc.tracks.tracks.size(), 50u);
  EXPECT_EQ(sc.points.size(), 50u);
  EXPECT_NEAR(sc.g0.norm(), kGravity, 1e-12);
  EXPECT_GT(sc.v0.norm(), 0.3);
  for (const Track& t : sc.tracks.tracks) {
    EXPECT_EQ(t.observations.size(), 10u);
    for (const Observation& o : t.observations) {
      EXPECT_GE(o.u.x(), 0.0);
      EXPECT_LT(o.u.x(), cfg.image_width);
      EXPECT_GE(o.row, 0);
      EXPECT_LT(o.row, cfg.image_height);
      EXPECT_LE(std::abs(o.row - static_cast<int>(std::floor(o.u.y()))), 1);
    }
  }
}

TEST(ScenarioTest, PointsHaveConfiguredDepthRange) {
  ScenarioConfig cfg;
  const Scenario sc = generate_scenario({}, cfg);
  for (const Eigen::Vector3d& X : sc.points) {
    EXPECT_GT(X.z(), 0.5 * cfg.depth_min);
    EXPECT_LT(X.z(), 1.5 * cfg.depth_max);
  }
}

TEST(ScenarioTest, IdealImuIntegratesToTruth) {
  const Scenario sc = generate_scenario({}, ScenarioConfig{});
  const auto integ = ideal_integrator(sc);
  // Each noiseless observation must be the projection of its point.
  const Observation& o = sc.tracks.tracks[3].observations[4];
  Geometry g;
  g.calib = sc.calib;
  g.integrator = integ;
  const std::int64_t i = g.scanline_index(o.frame, o.row);
  const CameraModel& cam = sc.calib.camera(o.cam_id);
  const Eigen::Matrix3d R = integ->rotation(i) * cam.R_cam_imu;
  const Eigen::Vector3d c =
      integ->translation(i, sc.v0, sc.g0) + integ->rotation(i) * cam.t_cam_imu;
  const Eigen::Vector3d x = cam.K * R.transpose() * (sc.points[3] - c);
  EXPECT_LT((x.head<2>() / x.z() - o.u.head<2>()).norm(), 1e-6);
}

TEST(ScenarioTest, DeterministicInSeed) {
  ScenarioConfig cfg;
  const Scenario a = generate_scenario({}, cfg);
  const Scenario b = generate_scenario({}, cfg);
  EXPECT_EQ(a.points[7], b.points[7]);
  cfg.seed = 2;
  const Scenario c = generate_scenario({}, cfg);
  EXPECT_NE(a.points[7], c.points[7]);
}

TEST(ScenarioTest, InvalidConfigThrows) {
  ScenarioConfig cfg;
  cfg.frames = 1;
  EXPECT_THROW(generate_scenario({}, cfg), Error);
  cfg = {};
  cfg.n_points = 0;
  EXPECT_THROW(generate_scenario({}, cfg), Error);
}

TEST(PerturbTest, NoiseStatistics) {
  ScenarioConfig cfg;
  cfg.sigma_px = 0.4;
  const Scenario sc = generate_scenario({}, cfg);
  const NoisyData nd = perturb(sc, cfg, 17);
  double sum2 = 0.0;
  int n = 0;
  for (std::size_t t = 0; t < sc.tracks.tracks.size(); ++t) {
    for (std::size_t k = 0; k < sc.tracks.tracks[t].observations.size(); ++k) {
      const Eigen::Vector3d d = nd.tracks.tracks[t].observations[k].u -
                                sc.tracks.tracks[t].observations[k].u;
      EXPECT_EQ(d.z(), 0.0);
      sum2 += d.head<2>().squaredNorm();
      n += 2;
    }
  }
  EXPECT_NEAR(std::sqrt(sum2 / n), 0.4, 0.04);
  EXPECT_FALSE(nd.jitter.empty());
  for (const auto& [i, R] : nd.jitter) {
    EXPECT_LT(so3::log(R).norm(), 1e-2);
  }
  const NoisyData again = perturb(sc, cfg, 17);
  EXPECT_EQ(again.tracks.tracks[5].observations[2].u,
            nd.tracks.tracks[5].observations[2].u);
}

TEST(PerturbTest, ZeroNoiseIsIdentity) {
  ScenarioConfig cfg;
  cfg.accel_noise = 0.0;
  cfg.rot_noise_deg = 0.0;
  const Scenario sc = generate_scenario({}, cfg);
  const NoisyData nd = perturb(sc, cfg, 3);
  EXPECT_EQ(nd.tracks.tracks[0].observations[0].u,
            sc.tracks.tracks[0].observations[0].u);
  EXPECT_EQ(nd.imu.samples[10].accel, sc.imu.samples[10].accel);
}

TEST(ErrorMetricsTest, KnownValues) {
  const Eigen::Vector3d g(0, 9.81, 0);
  const Eigen::Vector3d tilted =
      so3::exp(Eigen::Vector3d(0, 0, M_PI / 180.0)) * g;
  const ErrorMetrics m =
      error_metrics(Eigen::Vector3d(0.3, 0, 0.4), 2.0 * tilted,
                    Eigen::Vector3d::Zero(), g);
  EXPECT_NEAR(m.eps_v, 0.5, 1e-15);
  EXPECT_NEAR(m.eps_g, 1.0, 1e-9);
}

TEST(OutlierTest, InjectsRequestedFraction) {
  ScenarioConfig cfg;
  const Scenario sc = generate_scenario({}, cfg);
  TrackSet tracks = sc.tracks;
  const Pairing pairing =
      make_pairing(5, PairPattern::kDense, CameraSetup::kStereo);
  std::mt19937_64 rng(5);
  const auto bad = inject_outliers(tracks, pairing, sc.calib, 0.2, rng);
  EXPECT_FALSE(bad.empty());
  int pairs = 0, corrupted = 0;
  for (const Track& t : tracks.tracks) {
    for (const auto& [a, b] : pairing) {
      const bool ca = bad.count({t.id, a.cam_id, a.frame}) > 0;
      const bool cb = bad.count({t.id, b.cam_id, b.frame}) > 0;
      ++pairs;
      corrupted += (ca || cb) ? 1 : 0;
    }
  }
  EXPECT_GE(corrupted, static_cast<int>(0.2 * pairs));
  EXPECT_LT(corrupted, static_cast<int>(0.3 * pairs));
}

TEST(TrialSeedTest, DistinctAcrossInputs) {
  EXPECT_NE(trial_seed(1, 0.1, 0, 0), trial_seed(1, 0.2, 0, 0));
  EXPECT_NE(trial_seed(1, 0.1, 0, 0), trial_seed(1, 0.1, 1, 0));
  EXPECT_NE(trial_seed(1, 0.1, 0, 0), trial_seed(1, 0.1, 0, 1));
  EXPECT_NE(trial_seed(1, 0.1, 0, 0), trial_seed(2, 0.1, 0, 0));
  EXPECT_EQ(trial_seed(1, 0.1, 0, 3), trial_seed(1, 0.1, 0, 3));
}

}  // namespace
}  // namespace rsvio
