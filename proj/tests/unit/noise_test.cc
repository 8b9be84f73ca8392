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

#include "rsvio/noise.h"

#include <gtest/gtest.h>
#include <Eigen/Eigenvalues>

#include "oracles.h"

namespace rsvio {
namespace {

TEST(RayJacobianTest, CompositeMatchesFiniteDifferences) {
  const testing::RandomProblem rp = testing::make_random_problem(2, 0.3);
  const CorrespondenceSet& c = rp.problem.full->correspondences();
  for (int o : {0, 7, c.observation_count() - 1}) {
    const Observation& obs = c.observations[o];
    auto ray = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
      Observation m = obs;
      m.u.head<2>() = u;
      return calibrated_ray(m, rp.scenario.calib, c.rotations[o]).head<2>();
    };
    const Eigen::MatrixXd num =
        testing::central_difference(ray, obs.u.head<2>(), 1e-3);
    const RayJacobian J = jacobian_ray(obs, rp.scenario.calib, c.rotations[o]);
    EXPECT_LT(testing::relative_error(J.composite(), num), 1e-7);
    EXPECT_LT(testing::relative_error(ray_pixel_jacobian(c, o), num), 1e-7);
  }
}

TEST(SchurJacobianTest, MatchesRayFiniteDifferences) {
  const testing::RandomProblem rp = testing::make_random_problem(3, 0.3);
  const ReducedSystem& red = *rp.problem.reduced;
  const CorrespondenceSet& c = red.full().correspondences();
  const int pair = 5;
  const int obs[2] = {c.pairs[pair].a, c.pairs[pair].b};
  for (int comp = 0; comp < 4; ++comp) {
    const int o = obs[comp / 2];
    const int axis = comp % 2;
    auto rows = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      Eigen::Vector3d ray = c.rays[o];
      ray(axis) = x(0);
      const ReducedSystem m(
          std::make_shared<const FullSystem>(red.full().with_ray(o, ray)));
      Eigen::MatrixXd blk = m.B().middleRows(3 * pair, 3);
      return Eigen::Map<Eigen::VectorXd>(blk.data(), blk.size());
    };
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, c.rays[o](axis));
    const Eigen::MatrixXd num = testing::central_difference(rows, x0, 1e-6);
    const Eigen::MatrixXd ana =
        jacobian_schur(red, pair, static_cast<RayComponent>(comp));
    const Eigen::MatrixXd num_rows =
        Eigen::Map<const Eigen::MatrixXd>(num.data(), 3, red.cols());
    EXPECT_LT(testing::relative_error(ana, num_rows), 1e-6) << comp;
  }
}

TEST(PropagationTest, FourFactorJacobianMatchesFiniteDifferences) {
  for (std::uint64_t k = 0; k < 4; ++k) {
    const testing::RandomProblem rp = testing::make_random_problem(k, 0.3);
    const ReducedSystem& red = *rp.problem.reduced;
    const RowCovariances& covs = rp.problem.covs;
    for (int pair : {0, red.pair_count() / 2}) {
      const PairCovariance& pc = covs.pairs[pair];
      for (std::size_t j = 0; j < pc.observations.size(); ++j) {
        const auto num = testing::numeric_row_jacobian(
            red, rp.scenario.calib, pair, pc.observations[j]);
        for (int s = 0; s < 3; ++s) {
          const Eigen::MatrixXd ana =
              pc.J[s].middleCols(2 * static_cast<Eigen::Index>(j), 2);
          const double scale = pc.J[s].cwiseAbs().maxCoeff();
          EXPECT_LT((ana - num[s]).cwiseAbs().maxCoeff() / scale, 1e-5)
              << "problem " << k << " pair " << pair << " obs " << j;
        }
      }
    }
  }
}

TEST(PropagationTest, PairScopeIsPrefixOfTrackScope) {
  const testing::RandomProblem rp = testing::make_random_problem(5, 0.3);
  PointNoiseModel pair_only;
  pair_only.scope = NoiseScope::kPair;
  const RowCovariances a = propagate(*rp.problem.reduced, pair_only);
  const RowCovariances& b = rp.problem.covs;
  ASSERT_EQ(a.pairs.size(), b.pairs.size());
  for (std::size_t p = 0; p < a.pairs.size(); p += 7) {
    ASSERT_EQ(a.pairs[p].observations.size(), 2u);
    EXPECT_EQ(a.pairs[p].observations[0], b.pairs[p].observations[0]);
    EXPECT_EQ(a.pairs[p].observations[1], b.pairs[p].observations[1]);
    for (int s = 0; s < 3; ++s) {
      EXPECT_LT((a.pairs[p].J[s] - b.pairs[p].J[s].leftCols(4))
                    .cwiseAbs()
                    .maxCoeff(),
                1e-12);
    }
  }
}

TEST(PropagationTest, CovarianceBlocksAreSymmetricAndPsd) {
  const testing::RandomProblem rp = testing::make_random_problem(6, 0.3);
  const PairCovariance& pc = rp.problem.covs.pairs[3];
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < 3; ++t) {
      EXPECT_LT((pc.V0(s, t) - pc.V0(t, s).transpose()).norm(), 1e-12);
    }
  }
  Eigen::VectorXd y(7);
  y << rp.scenario.v0, rp.scenario.g0, 1.0;
  const Eigen::Matrix3d Q = pc.quadratic(y);
  EXPECT_LT((Q - Q.transpose()).norm(), 1e-12 * Q.norm());
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(Q)
                .eigenvalues()
                .minCoeff(),
            -1e-12 * Q.norm());
  const auto nine = propagate(*rp.problem.reduced, PointNoiseModel{}, 3);
  EXPECT_LT((nine[1] - pc.V0(0, 1)).norm(), 1e-12 * pc.V0(0, 1).norm() + 1e-30);
}

TEST(PropagationTest, PointCovarianceScalesLinearly) {
  const testing::RandomProblem rp = testing::make_random_problem(7, 0.3);
  PointNoiseModel big;
  big.V0_u *= 4.0;
  const RowCovariances a = propagate(*rp.problem.reduced, big);
  const PairCovariance& p0 = rp.problem.covs.pairs[2];
  const PairCovariance& p1 = a.pairs[2];
  EXPECT_LT((p1.V0(1, 2) - 4.0 * p0.V0(1, 2)).norm(),
            1e-12 * p1.V0(1, 2).norm());
}

}  // namespace
}  // namespace rsvio
