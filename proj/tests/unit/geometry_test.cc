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

#include "rsvio/geometry.h"

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "oracles.h"
#include "rsvio/error.h"
#include "rsvio/so3.h"
#include "rsvio/synth.h"

namespace rsvio {
namespace {

ImuStream random_stream(int n, double dt, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> w(0.0, 0.8), a(0.0, 2.0);
  ImuStream s;
  s.dt = dt;
  for (int k = 0; k < n; ++k) {
    ImuSample x;
    x.omega = Eigen::Vector3d(w(rng), w(rng), w(rng));
    x.accel = Eigen::Vector3d(a(rng), a(rng) - 9.81, a(rng));
    s.samples.push_back(x);
  }
  return s;
}

TEST(ImuStreamTest, ValidateRejectsBadStreams) {
  ImuStream s;
  EXPECT_THROW(s.validate(), Error);
  s = random_stream(10, 0.0, 1);
  EXPECT_THROW(s.validate(), Error);
  s = random_stream(10, 1e-3, 1);
  EXPECT_NO_THROW(s.validate());
  s.samples[3].accel.x() = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(s.validate(), Error);
  s = random_stream(10, 1e-3, 1);
  s.samples[2].omega.z() = 1e3;
  EXPECT_THROW(s.validate(), Error);
}

TEST(ImuStreamTest, UpsampleIsLinear) {
  ImuStream s = random_stream(4, 0.01, 2);
  const ImuStream u = upsample_imu(s, 0.0025);
  ASSERT_EQ(u.size(), 13u);
  EXPECT_LT((u.samples[4].accel - s.samples[1].accel).norm(), 1e-12);
  EXPECT_LT((u.samples[6].omega -
             0.5 * (s.samples[1].omega + s.samples[2].omega))
                .norm(),
            1e-12);
}

TEST(IntegrationTest, ClosedFormMatchesEulerSteps) {
  const ImuStream s = random_stream(300, 1e-3, 3);
  const auto rotations = integrate_rotations(s);
  const Eigen::Vector3d v0(0.3, -0.1, 1.2), g0(0.1, 9.8, -0.3);
  for (std::int64_t i : {0, 1, 2, 17, 150, 299}) {
    const Eigen::Vector3d ref = testing::euler_position(s, v0, g0, i);
    EXPECT_LT((integrate_translation(s, rotations, v0, g0, i) - ref).norm(),
              1e-12)
        << i;
  }
}

TEST(IntegrationTest, ScanlineIntegratorMatchesDirectSums) {
  const double dt = 1e-3;
  const ImuStream s = random_stream(400, dt, 4);
  const ScanlineIntegrator integ(s, dt);
  const auto rotations = integrate_rotations(s);
  const Eigen::Vector3d v0(1, 2, 3), g0(0, 9.81, 0);
  for (std::int64_t i : {0, 5, 123, 399}) {
    EXPECT_LT((integ.rotation(i) - rotations[i]).norm(), 1e-12);
    EXPECT_LT((integ.translation(i, v0, g0) -
               integrate_translation(s, rotations, v0, g0, i))
                  .norm(),
              1e-12);
    EXPECT_LT((integ.rotation(i) - integrate_rotation(s, i)).norm(), 1e-12);
  }
  EXPECT_THROW(integ.rotation(integ.max_index() + 1), Error);
}

TEST(IntegrationTest, TranslationIsAffineInVelocityAndGravity) {
  const ImuStream s = random_stream(200, 1e-3, 5);
  const ScanlineIntegrator integ(s, 1e-3);
  const std::int64_t i = 150;
  const Eigen::Vector3d base =
      integ.translation(i, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
  EXPECT_LT((base - integ.accel_displacement(i)).norm(), 1e-15);
  const double t = static_cast<double>(i) * 1e-3;
  const Eigen::Vector3d v0(0.5, 0, 0), g0(0, 0, 2);
  EXPECT_LT((integ.translation(i, v0, g0) -
             (base + t * v0 + 0.5 * t * t * g0))
                .norm(),
            1e-14);
}

TEST(IntegrationTest, AccelBiasCoefficientIsLinear) {
  ImuStream s = random_stream(200, 1e-3, 6);
  const ScanlineIntegrator a(s, 1e-3);
  const Eigen::Vector3d e(0.02, -0.05, 0.01);
  for (auto& x : s.samples) x.accel += e;
  const ScanlineIntegrator b(s, 1e-3);
  for (std::int64_t i : {10, 100, 199}) {
    EXPECT_LT((b.accel_displacement(i) -
               (a.accel_displacement(i) + a.accel_bias_coefficient(i) * e))
                  .norm(),
              1e-15);
  }
}

TEST(IntegrationTest, IntegrateThenInterpolateApproximatesFineGrid) {
  TrajectorySpec traj;
  ScenarioConfig cfg;
  const Scenario sc = generate_scenario(traj, cfg);
  const double dt = cfg.readout_per_line;
  const ScanlineIntegrator fine(sc.imu, dt);
  ScanlineIntegrator::Options o;
  o.mode = IntegrationMode::kIntegrateThenInterpolate;
  const ScanlineIntegrator coarse(sc.imu, dt, o);
  const std::int64_t i = fine.max_index() / 2 + 7;
  EXPECT_LT(so3::log(fine.rotation(i).transpose() * coarse.rotation(i)).norm(),
            2e-3);
  EXPECT_LT((fine.translation(i, sc.v0, sc.g0) -
             coarse.translation(i, sc.v0, sc.g0))
                .norm(),
            1e-3);
}

TEST(IntegrationTest, GyroJacobianMatchesFiniteDifferences) {
  ImuStream s = random_stream(120, 1e-3, 8);
  ScanlineIntegrator::Options o;
  o.gyro_bias_jacobians = true;
  const std::int64_t i = 100;
  auto rotated = [&](const Eigen::VectorXd& e) {
    ImuStream c = s;
    for (auto& x : c.samples) x.omega += e;
    const ScanlineIntegrator integ(c, 1e-3);
    Eigen::VectorXd out(6);
    out << so3::log(ScanlineIntegrator(s, 1e-3).rotation(i).transpose() *
                    integ.rotation(i)),
        integ.accel_displacement(i);
    return out;
  };
  const ScanlineIntegrator integ(s, 1e-3, o);
  const Eigen::MatrixXd num =
      testing::central_difference(rotated, Eigen::Vector3d::Zero(), 1e-6);
  EXPECT_LT(testing::relative_error(integ.rotation_gyro_jacobian(i),
                                    num.topRows(3)),
            1e-6);
  EXPECT_LT(testing::relative_error(integ.accel_displacement_gyro_jacobian(i),
                                    num.bottomRows(3)),
            1e-6);
}

RigCalibration test_rig() {
  ScenarioConfig cfg;
  return make_rig(cfg);
}

TEST(GeometryTest, ScanlineIndexRowsTopToBottom) {
  Geometry g;
  g.calib = test_rig();
  g.integrator = std::make_shared<const ScanlineIntegrator>(
      random_stream(100, 1e-3, 1), g.calib.readout_per_line);
  const double per_frame = 1.0 / (g.calib.fps * g.calib.readout_per_line);
  EXPECT_EQ(g.scanline_index(0, 0), 0);
  EXPECT_EQ(g.scanline_index(0, 10), 10);
  EXPECT_EQ(g.scanline_index(2, 5), std::llround(2 * per_frame) + 5);
  g.shutter = ShutterModel::kGlobalOnRolling;
  EXPECT_EQ(g.scanline_index(1, 0), g.scanline_index(1, 479));
  EXPECT_EQ(g.scanline_index(0, 3), g.calib.image_height / 2);
}

TEST(GeometryTest, CalibrationValidation) {
  RigCalibration c = test_rig();
  EXPECT_NO_THROW(c.validate());
  c.readout_per_line = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = test_rig();
  c.cameras.clear();
  EXPECT_THROW(c.validate(), Error);
  c = test_rig();
  EXPECT_THROW(c.camera(5), Error);
}

TEST(GeometryTest, CalibratedRayIsNormalizedBackProjection) {
  const RigCalibration c = test_rig();
  Observation o;
  o.u = Eigen::Vector3d(400.0, 100.0, 1.0);
  const Eigen::Matrix3d R = so3::exp(Eigen::Vector3d(0.05, -0.1, 0.02));
  const Eigen::Vector3d p = calibrated_ray(o, c, R);
  EXPECT_DOUBLE_EQ(p.z(), 1.0);
  const Eigen::Vector3d raw =
      R * c.camera(0).R_cam_imu * c.camera(0).K.inverse() * o.u;
  EXPECT_LT((p - raw / raw.z()).norm(), 1e-14);
  EXPECT_LT((raw_ray(o, c, R) - raw).norm(), 1e-14);
}

TEST(GeometryTest, RayParallelToPlaneThrows) {
  const RigCalibration c = test_rig();
  Observation o;
  o.u = Eigen::Vector3d(320.0, 240.0, 1.0);
  const Eigen::Matrix3d R = so3::exp(Eigen::Vector3d(M_PI / 2, 0, 0));
  EXPECT_THROW(calibrated_ray(o, c, R), Error);
}

TEST(GeometryTest, LocateRejectsOutOfRangeRows) {
  Geometry g;
  g.calib = test_rig();
  g.integrator = std::make_shared<const ScanlineIntegrator>(
      random_stream(100, 1e-3, 9), g.calib.readout_per_line);
  Observation o;
  o.row = -1;
  EXPECT_THROW(g.locate(o), Error);
  o.row = 5;
  EXPECT_EQ(g.locate(o).scanline, 5);
  o.frame = 50;
  EXPECT_THROW(g.locate(o), Error);
}

}  // namespace
}  // namespace rsvio
