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

#include <cassert>
#include <cmath>

#include <Eigen/LU>

#include "rsvio/error.h"

namespace rsvio {
namespace {

/// Derivatives of one block of B w.r.t. the x and y ray components of one of
/// its observations. Returns a (3n x C) matrix per component.
class BlockDerivatives {
 public:
  BlockDerivatives(const ReducedSystem& reduced, int block)
      : reduced_(reduced),
        block_(reduced.full().blocks()[static_cast<std::size_t>(block)]),
        f_(reduced.factors()[static_cast<std::size_t>(block)]) {
    const Eigen::MatrixXd& S = reduced.full().S();
    const auto n = static_cast<Eigen::Index>(block_.pairs.size());
    Sb_.resize(3 * n, S.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
      Sb_.middleRows<3>(3 * r) = S.middleRows<3>(3 * block_.pairs[r]);
    }
    KS_ = f_.H.transpose() * Sb_;
  }

  /// -dG/dp_{obs,c} * S for the block, obs given as a local column.
  Eigen::MatrixXd derivative(int local_obs, int component) const {
    const CorrespondenceSet& corrs = reduced_.full().correspondences();
    const int global = block_.observations[static_cast<std::size_t>(local_obs)];
    const auto rows = Sb_.rows();
    // dP/dp_{obs,c} has a +-1 in row 3r + c of each pair r using obs.
    Eigen::VectorXd d = Eigen::VectorXd::Zero(rows);
    for (std::size_t r = 0; r < block_.pairs.size(); ++r) {
      const Correspondence& c = corrs.pairs[block_.pairs[r]];
      const auto row = static_cast<Eigen::Index>(3 * r) + component;
      if (c.a == global) d(row) += 1.0;
      if (c.b == global) d(row) -= 1.0;
    }
    const Eigen::VectorXd q = f_.P.transpose() * d;
    const Eigen::VectorXd left = d - f_.H * q;
    const Eigen::RowVectorXd right =
        d.transpose() * Sb_ - q.transpose() * KS_;
    // dG S = (d - H q) (K S)_a + H_a (d^T S - q^T K S)
    Eigen::MatrixXd dGS = left * KS_.row(local_obs);
    dGS.noalias() += f_.H.col(local_obs) * right;
    return -dGS;
  }

  /// (I - G) times a block-row matrix.
  Eigen::MatrixXd project(const Eigen::MatrixXd& X) const {
    return X - f_.H * (f_.P.transpose() * X);
  }

  const TrackBlock& block() const { return block_; }

 private:
  const ReducedSystem& reduced_;
  const TrackBlock& block_;
  const TrackFactors& f_;
  Eigen::MatrixXd Sb_;
  Eigen::MatrixXd KS_;
};

}  // namespace

Eigen::Matrix2d ray_pixel_jacobian(const CorrespondenceSet& corrs,
                                   int observation) {
  const auto o = static_cast<std::size_t>(observation);
  const Eigen::Vector3d& raw = corrs.raw_rays[o];
  Eigen::Matrix<double, 2, 3> J3;
  J3 << 1.0, 0.0, -raw.x() / raw.z(), 0.0, 1.0, -raw.y() / raw.z();
  J3 /= raw.z();
  return J3 * corrs.pixel_to_ray[o].leftCols<2>();
}

RayJacobian jacobian_ray(const Observation& obs, const RigCalibration& calib,
                         const Eigen::Matrix3d& R_i0) {
  const CameraModel& cam = calib.camera(obs.cam_id);
  const Eigen::Matrix3d Kinv = cam.K.inverse();
  const Eigen::Matrix3d Rt = R_i0 * cam.R_cam_imu;
  const Eigen::Vector3d raw = Rt * Kinv * obs.u;
  if (std::abs(raw.z()) <= kMinRayDepth * raw.norm()) {
    throw Error(ErrorCode::kDegenerateRay,
                "ray parallel to the normalization plane");
  }
  const Eigen::Vector3d p = raw / raw.z();
  RayJacobian J;
  J.J1 = Kinv.topLeftCorner<2, 2>();
  J.J2 = Rt.leftCols<2>();
  J.J3 << 1.0, 0.0, -p.x(), 0.0, 1.0, -p.y();
  J.J3 /= raw.z();
  return J;
}

Eigen::MatrixXd jacobian_schur(const ReducedSystem& reduced, int pair,
                               RayComponent component) {
  if (pair < 0 || pair >= reduced.pair_count()) {
    throw Error(ErrorCode::kOutOfRange, "pair index out of range");
  }
  const auto [block, local_pair] = reduced.locate_pair(pair);
  BlockDerivatives deriv(reduced, block);
  const Correspondence& c = reduced.full().correspondences().pairs[pair];
  const int comp = static_cast<int>(component);
  const int obs = comp < 2 ? c.a : c.b;
  assert(reduced.block_of_observation(obs) == block);
  const Eigen::MatrixXd dB =
      deriv.derivative(reduced.local_observation(obs), comp % 2);
  return dB.middleRows(3 * local_pair, 3);
}

Eigen::MatrixXd PairCovariance::V0(int s, int t) const {
  return J[static_cast<std::size_t>(s)] * V0_u *
         J[static_cast<std::size_t>(t)].transpose();
}

Eigen::Matrix3d PairCovariance::quadratic(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd Jy(V0_u.rows(), 3);
  for (int s = 0; s < 3; ++s) Jy.col(s) = J[static_cast<std::size_t>(s)].transpose() * y;
  return Jy.transpose() * V0_u * Jy;
}

RowCovariances propagate(const ReducedSystem& reduced,
                         const PointNoiseModel& noise) {
  const FullSystem& full = reduced.full();
  const CorrespondenceSet& corrs = full.correspondences();
  const auto cols = full.S().cols();
  const auto& gyro = full.gyro_model();
  const int gyro_col = full.layout().gyro_offset();

  RowCovariances out;
  out.cols = static_cast<int>(cols);
  out.pairs.resize(static_cast<std::size_t>(corrs.pair_count()));

  for (std::size_t bi = 0; bi < full.blocks().size(); ++bi) {
    BlockDerivatives deriv(reduced, static_cast<int>(bi));
    const TrackBlock& block = full.blocks()[bi];
    const auto m = block.observations.size();
    const auto n = static_cast<Eigen::Index>(block.pairs.size());

    // dB/dp for every (observation, component) of the block.
    std::vector<std::array<Eigen::MatrixXd, 2>> dB(m);
    std::vector<Eigen::Matrix2d> D(m);
    for (std::size_t k = 0; k < m; ++k) {
      const int o = block.observations[k];
      for (int c = 0; c < 2; ++c) {
        dB[k][static_cast<std::size_t>(c)] =
            deriv.derivative(static_cast<int>(k), c);
      }
      D[k] = ray_pixel_jacobian(corrs, o);
    }

    // Extra u-space term (I - G) dS/du from image-dependent gyro columns.
    std::vector<std::array<Eigen::MatrixXd, 2>> dBu(gyro ? m : 0);
    if (gyro) {
      for (std::size_t k = 0; k < m; ++k) {
        const int o = block.observations[k];
        for (int c = 0; c < 2; ++c) {
          Eigen::MatrixXd dS = Eigen::MatrixXd::Zero(3 * n, cols);
          const Eigen::Matrix3d term =
              gyro->depth_prior(o) * gyro->dray_gyro_du[static_cast<std::size_t>(o)]
                                                   [static_cast<std::size_t>(c)];
          for (Eigen::Index r = 0; r < n; ++r) {
            const Correspondence& pc = corrs.pairs[block.pairs[r]];
            if (pc.a == o) dS.block<3, 3>(3 * r, gyro_col) += term;
            if (pc.b == o) dS.block<3, 3>(3 * r, gyro_col) -= term;
          }
          dBu[k][static_cast<std::size_t>(c)] = deriv.project(dS);
        }
      }
    }

    for (Eigen::Index r = 0; r < n; ++r) {
      const int pair = block.pairs[r];
      const Correspondence& pc = corrs.pairs[pair];
      // Local observations whose pixels enter this pair, own two first.
      std::vector<std::size_t> locals = {
          static_cast<std::size_t>(reduced.local_observation(pc.a)),
          static_cast<std::size_t>(reduced.local_observation(pc.b))};
      if (noise.scope == NoiseScope::kTrack) {
        for (std::size_t k = 0; k < m; ++k) {
          if (k != locals[0] && k != locals[1]) locals.push_back(k);
        }
      }
      const auto width = static_cast<Eigen::Index>(2 * locals.size());
      PairCovariance& cov = out.pairs[static_cast<std::size_t>(pair)];
      cov.observations.clear();
      cov.V0_u = Eigen::MatrixXd::Zero(width, width);
      for (std::size_t j = 0; j < locals.size(); ++j) {
        const int o = block.observations[locals[j]];
        cov.observations.push_back(o);
        cov.V0_u.block<2, 2>(2 * j, 2 * j) = noise.covariance(o);
      }
      for (int s = 0; s < 3; ++s) {
        const auto row = 3 * r + s;
        Eigen::MatrixXd J(cols, width);
        for (std::size_t j = 0; j < locals.size(); ++j) {
          const std::size_t k = locals[j];
          // J4 (d/dp_x, d/dp_y) times the pixel-to-ray factors.
          Eigen::Matrix<double, Eigen::Dynamic, 2> J4(cols, 2);
          J4.col(0) = dB[k][0].row(row).transpose();
          J4.col(1) = dB[k][1].row(row).transpose();
          J.middleCols<2>(2 * static_cast<Eigen::Index>(j)) = J4 * D[k];
          if (gyro) {
            J.col(2 * j) += dBu[k][0].row(row).transpose();
            J.col(2 * j + 1) += dBu[k][1].row(row).transpose();
          }
        }
        cov.J[static_cast<std::size_t>(s)] = std::move(J);
      }
    }
  }
  return out;
}

std::array<Eigen::MatrixXd, 9> propagate(const ReducedSystem& reduced,
                                         const PointNoiseModel& noise,
                                         int pair) {
  if (pair < 0 || pair >= reduced.pair_count()) {
    throw Error(ErrorCode::kOutOfRange, "pair index out of range");
  }
  const RowCovariances all = propagate(reduced, noise);
  std::array<Eigen::MatrixXd, 9> out;
  const PairCovariance& pc = all.pairs[static_cast<std::size_t>(pair)];
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < 3; ++t) out[static_cast<std::size_t>(3 * s + t)] = pc.V0(s, t);
  }
  return out;
}

}  // namespace rsvio
