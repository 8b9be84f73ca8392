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

#include "rsvio/trajectory.h"

#include <gtest/gtest.h>

#include "rsvio/error.h"
#include "rsvio/so3.h"

namespace rsvio {
namespace {

class TrajectoryKindTest : public ::testing::TestWithParam<TrajectoryKind> {};

TEST_P(TrajectoryKindTest, DerivativesAreConsistent) {
  TrajectorySpec spec;
  spec.kind = GetParam();
  const double h = 1e-5;
  for (double t : {0.3, 1.7, 4.2}) {
    const TrajectorySample s = sample_trajectory(spec, t);
    const TrajectorySample sp = sample_trajectory(spec, t + h);
    const TrajectorySample sm = sample_trajectory(spec, t - h);
    EXPECT_LT(((sp.p - sm.p) / (2 * h) - s.v).norm(), 1e-6);
    EXPECT_LT(((sp.v - sm.v) / (2 * h) - s.a).norm(), 1e-5);
    // Body rate: R(t + h) = R(t) Exp(omega h).
    const Eigen::Vector3d w =
        so3::log(sm.R.transpose() * sp.R) / (2 * h);
    EXPECT_LT((w - s.omega).norm(), 1e-6);
    EXPECT_TRUE(so3::is_rotation(s.R, 1e-12));
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllKinds, TrajectoryKindTest,
    ::testing::Values(TrajectoryKind::kStatic, TrajectoryKind::kForward,
                      TrajectoryKind::kLoop, TrajectoryKind::kShake,
                      TrajectoryKind::kForwardBack));

TEST(TrajectoryTest, StaticDoesNotMove) {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kStatic;
  const TrajectorySample s = sample_trajectory(spec, 2.0);
  EXPECT_LT(s.v.norm(), 1e-15);
  EXPECT_LT(s.omega.norm(), 1e-15);
}

TEST(TrajectoryTest, ForwardDurationFromLengthAndSpeed) {
  TrajectorySpec spec;
  EXPECT_NEAR(trajectory_duration(spec), spec.length / spec.mean_speed, 1e-12);
}

TEST(TrajectoryTest, KindNamesRoundTrip) {
  for (TrajectoryKind k :
       {TrajectoryKind::kStatic, TrajectoryKind::kForward, TrajectoryKind::kLoop,
        TrajectoryKind::kShake, TrajectoryKind::kForwardBack,
        TrajectoryKind::kCustomSpline}) {
    EXPECT_EQ(parse_trajectory_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_trajectory_kind("zigzag"), Error);
}

TEST(QuinticSplineTest, InterpolatesWaypointsAndIsC2) {
  std::vector<Eigen::Vector3d> pts = {
      {0, 0, 0}, {1, 0, 0.5}, {2, 0.2, 1.5}, {2.5, 0.1, 3.0}, {3, 0, 4}};
  const QuinticSpline spline(pts, 0.5);
  EXPECT_NEAR(spline.duration(), 2.0, 1e-12);
  Eigen::Vector3d p, v, a, pl, vl, al, pr, vr, ar;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    spline.evaluate(0.5 * static_cast<double>(k), &p, &v, &a);
    EXPECT_LT((p - pts[k]).norm(), 1e-12);
  }
  const double eps = 1e-9;
  for (double knot : {0.5, 1.0, 1.5}) {
    spline.evaluate(knot - eps, &pl, &vl, &al);
    spline.evaluate(knot + eps, &pr, &vr, &ar);
    EXPECT_LT((vl - vr).norm(), 1e-6);
    EXPECT_LT((al - ar).norm(), 1e-5);
  }
}

TEST(TrajectoryTest, CustomSplineUsesWaypoints) {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kCustomSpline;
  spec.waypoints = {{0, 0, 0}, {0.5, 0, 0.5}, {1, 0, 1.2}, {1.5, 0, 2}};
  spec.waypoint_dt = 1.0;
  EXPECT_NEAR(trajectory_duration(spec), 3.0, 1e-12);
  EXPECT_LT((sample_trajectory(spec, 2.0).p - spec.waypoints[2]).norm(), 1e-12);
}

}  // namespace
}  // namespace rsvio
