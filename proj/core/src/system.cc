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

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include "rsvio/error.h"

namespace rsvio {
namespace {

constexpr double kDegenerateGramRatio = 1e-12;

struct CameraFrameHash {
  std::size_t operator()(const CameraFrame& cf) const noexcept {
    return std::hash<long long>()((static_cast<long long>(cf.cam_id) << 32) ^
                                  static_cast<long long>(cf.frame));
  }
};

/// Local ray matrix of one track block.
Eigen::MatrixXd block_P(const CorrespondenceSet& corrs, const TrackBlock& block,
                        const std::vector<int>& local_of) {
  const auto n = static_cast<Eigen::Index>(block.pairs.size());
  const auto m = static_cast<Eigen::Index>(block.observations.size());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(3 * n, m);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Correspondence& c = corrs.pairs[block.pairs[r]];
    P.block<3, 1>(3 * r, local_of[c.a]) = corrs.rays[c.a];
    P.block<3, 1>(3 * r, local_of[c.b]) = -corrs.rays[c.b];
  }
  return P;
}

/// Inverse of the (small, SPD) Gram matrix; throws on a degenerate column.
Eigen::MatrixXd gram_inverse(const Eigen::MatrixXd& PtP,
                             const TrackBlock& block) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(PtP);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double largest = ev.maxCoeff();
  if (!(ev.minCoeff() > kDegenerateGramRatio * largest)) {
    Eigen::Index col = 0;
    eig.eigenvectors().col(0).cwiseAbs().maxCoeff(&col);
    std::ostringstream os;
    os << "singular P^T P in track " << block.track_id
       << ", depth column of observation " << block.observations[col];
    throw Error(ErrorCode::kDegenerateTrack, os.str());
  }
  return eig.eigenvectors() * ev.cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

Pairing make_pairing(int frames, PairPattern pattern, CameraSetup setup) {
  const int needed = setup == CameraSetup::kMono ? 5 : 2;
  if (frames < needed) {
    throw Error(ErrorCode::kInsufficientData,
                "pairing needs at least " + std::to_string(needed) +
                    " frames, got " + std::to_string(frames));
  }
  const int second_cam = setup == CameraSetup::kStereo ? 1 : 0;
  const int anchors = pattern == PairPattern::kFirstAnchor ? 1 : frames - 1;
  Pairing out;
  for (int a = 0; a < anchors; ++a) {
    for (int b = a + 1; b < frames; ++b) {
      out.push_back({CameraFrame{0, a}, CameraFrame{second_cam, b}});
    }
  }
  return out;
}

CorrespondenceSet build_correspondences(const TrackSet& tracks,
                                        const Pairing& pairing,
                                        const Geometry& geometry,
                                        const CorrespondenceOptions& options) {
  std::int64_t min_gap = options.min_scanline_gap;
  if (min_gap < 0) {
    min_gap = std::llround(0.5 / (geometry.calib.fps * geometry.integrator->dt()));
  }

  CorrespondenceSet out;
  for (const Track& track : tracks.tracks) {
    if (track.observations.size() < 2) continue;

    std::unordered_map<CameraFrame, std::size_t, CameraFrameHash> by_view;
    for (std::size_t k = 0; k < track.observations.size(); ++k) {
      const auto& o = track.observations[k];
      if (!by_view.emplace(CameraFrame{o.cam_id, o.frame}, k).second) {
        throw Error(ErrorCode::kInvalidArgument,
                    "track " + std::to_string(track.id) +
                        " observes camera " + std::to_string(o.cam_id) +
                        " frame " + std::to_string(o.frame) + " twice");
      }
    }

    std::map<std::size_t, int> global_of;  // local observation -> global
    auto global_index = [&](std::size_t local) {
      if (auto it = global_of.find(local); it != global_of.end()) {
        return it->second;
      }
      const Observation obs = geometry.locate(track.observations[local]);
      const Eigen::Matrix3d R = geometry.rotation(obs.scanline);
      const Eigen::Vector3d raw = raw_ray(obs, geometry.calib, R);
      const Eigen::Vector3d ray = calibrated_ray(obs, geometry.calib, R);
      const int g = out.observation_count();
      out.observations.push_back(obs);
      out.rays.push_back(ray);
      out.raw_rays.push_back(raw);
      out.rotations.push_back(R);
      const CameraModel& cam = geometry.calib.camera(obs.cam_id);
      out.pixel_to_ray.push_back(R * cam.R_cam_imu * cam.K.inverse());
      out.track_of.push_back(track.id);
      global_of.emplace(local, g);
      return g;
    };

    for (const auto& [first, second] : pairing) {
      auto ia = by_view.find(first);
      auto ib = by_view.find(second);
      if (ia == by_view.end() || ib == by_view.end()) continue;
      const auto& oa = track.observations[ia->second];
      const auto& ob = track.observations[ib->second];
      const std::int64_t i = geometry.scanline_index(oa.frame, oa.row);
      const std::int64_t j = geometry.scanline_index(ob.frame, ob.row);
      if (std::llabs(i - j) < min_gap) continue;
      Correspondence c;
      c.a = global_index(ia->second);
      c.b = global_index(ib->second);
      c.track_id = track.id;
      out.pairs.push_back(c);
    }
  }
  return out;
}

CorrespondenceSet select_pairs(const CorrespondenceSet& corrs,
                               const std::vector<int>& pair_indices) {
  CorrespondenceSet out;
  std::vector<int> remap(corrs.observations.size(), -1);
  auto take = [&](int obs) {
    if (remap[obs] < 0) {
      remap[obs] = out.observation_count();
      out.observations.push_back(corrs.observations[obs]);
      out.rays.push_back(corrs.rays[obs]);
      out.raw_rays.push_back(corrs.raw_rays[obs]);
      out.rotations.push_back(corrs.rotations[obs]);
      out.pixel_to_ray.push_back(corrs.pixel_to_ray[obs]);
      out.track_of.push_back(corrs.track_of[obs]);
    }
    return remap[obs];
  };
  for (int p : pair_indices) {
    if (p < 0 || p >= corrs.pair_count()) {
      throw Error(ErrorCode::kOutOfRange, "pair index out of range");
    }
    const Correspondence& c = corrs.pairs[p];
    Correspondence n = c;
    n.a = take(c.a);
    n.b = take(c.b);
    out.pairs.push_back(n);
  }
  return out;
}

PairCoefficients pair_coefficients(const ScanlineIntegrator& integrator,
                                   std::int64_t i, std::int64_t j,
                                   const Eigen::Matrix3d& R_i,
                                   const Eigen::Matrix3d& R_j,
                                   const Eigen::Vector3d& t_cam_i,
                                   const Eigen::Vector3d& t_cam_j) {
  if (i == j) {
    throw Error(ErrorCode::kDegeneratePair,
                "pair observations share scanline " + std::to_string(i));
  }
  const double dt = integrator.dt();
  const auto fi = static_cast<double>(i);
  const auto fj = static_cast<double>(j);
  PairCoefficients c;
  c.xi = (fi - fj) * dt;
  c.mu = (fi * fi - fj * fj) * dt * dt / 2.0;
  c.kappa = R_i * t_cam_i - R_j * t_cam_j + integrator.accel_displacement(i) -
            integrator.accel_displacement(j);
  return c;
}

PairCoefficients pair_coefficients(const Geometry& geometry,
                                   const Observation& a,
                                   const Observation& b) {
  const Observation la = geometry.locate(a);
  const Observation lb = geometry.locate(b);
  return pair_coefficients(*geometry.integrator, la.scanline, lb.scanline,
                           geometry.rotation(la.scanline),
                           geometry.rotation(lb.scanline),
                           geometry.calib.camera(a.cam_id).t_cam_imu,
                           geometry.calib.camera(b.cam_id).t_cam_imu);
}

// ---------------------------------------------------------------------------

FullSystem::FullSystem(std::shared_ptr<const CorrespondenceSet> corrs,
                       Eigen::MatrixXd S, ColumnLayout layout,
                       std::vector<TrackBlock> blocks,
                       std::optional<GyroColumnModel> gyro)
    : corrs_(std::move(corrs)),
      S_(std::move(S)),
      layout_(layout),
      blocks_(std::move(blocks)),
      gyro_(std::move(gyro)) {}

Eigen::MatrixXd FullSystem::dense_P() const {
  const auto& c = *corrs_;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(3 * c.pair_count(),
                                            c.observation_count());
  for (int r = 0; r < c.pair_count(); ++r) {
    P.block<3, 1>(3 * r, c.pairs[r].a) = c.rays[c.pairs[r].a];
    P.block<3, 1>(3 * r, c.pairs[r].b) = -c.rays[c.pairs[r].b];
  }
  return P;
}

Eigen::MatrixXd FullSystem::dense_SP() const {
  Eigen::MatrixXd P = dense_P();
  Eigen::MatrixXd SP(S_.rows(), S_.cols() + P.cols());
  SP << S_, P;
  return SP;
}

FullSystem FullSystem::with_ray(int observation,
                                const Eigen::Vector3d& ray) const {
  auto copy = std::make_shared<CorrespondenceSet>(*corrs_);
  copy->rays.at(static_cast<std::size_t>(observation)) = ray;
  return FullSystem(copy, S_, layout_, blocks_, gyro_);
}

std::vector<TrackBlock> group_blocks(const CorrespondenceSet& corrs) {
  std::vector<TrackBlock> blocks;
  std::unordered_map<int, std::size_t> index;
  for (int p = 0; p < corrs.pair_count(); ++p) {
    const Correspondence& c = corrs.pairs[p];
    auto [it, inserted] = index.emplace(c.track_id, blocks.size());
    if (inserted) {
      blocks.push_back(TrackBlock{c.track_id, {}, {}});
    }
    TrackBlock& b = blocks[it->second];
    b.pairs.push_back(p);
    for (int o : {c.a, c.b}) {
      if (std::find(b.observations.begin(), b.observations.end(), o) ==
          b.observations.end()) {
        b.observations.push_back(o);
      }
    }
  }
  return blocks;
}

FullSystem assemble(const CorrespondenceSet& corrs, const Geometry& geometry) {
  const ColumnLayout layout{};
  const int n = corrs.pair_count();
  const int m = corrs.observation_count();
  if (3 * n - m < layout.params()) {
    std::ostringstream os;
    os << "need >= 6 correspondences: " << n << " pairs with " << m
       << " depths leave " << std::max(0, 3 * n - m)
       << " constraints for 6 unknowns";
    throw Error(ErrorCode::kInsufficientData, os.str());
  }
  std::vector<char> referenced(static_cast<std::size_t>(m), 0);

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(3 * n, layout.cols());
  for (int r = 0; r < n; ++r) {
    const Correspondence& c = corrs.pairs[r];
    const Observation& a = corrs.observations[c.a];
    const Observation& b = corrs.observations[c.b];
    referenced[c.a] = referenced[c.b] = 1;
    const PairCoefficients k = pair_coefficients(
        *geometry.integrator, a.scanline, b.scanline, corrs.rotations[c.a],
        corrs.rotations[c.b], geometry.calib.camera(a.cam_id).t_cam_imu,
        geometry.calib.camera(b.cam_id).t_cam_imu);
    S.block<3, 3>(3 * r, 0).diagonal().setConstant(k.xi);
    S.block<3, 3>(3 * r, 3).diagonal().setConstant(k.mu);
    S.block<3, 1>(3 * r, layout.homogeneous()) = k.kappa;
  }
  for (int o = 0; o < m; ++o) {
    if (!referenced[o]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "depth column " + std::to_string(o) +
                      " is not referenced by any pair");
    }
  }
  auto shared = std::make_shared<CorrespondenceSet>(corrs);
  auto blocks = group_blocks(*shared);
  return FullSystem(std::move(shared), std::move(S), layout,
                    std::move(blocks));
}

// ---------------------------------------------------------------------------

ReducedSystem::ReducedSystem(std::shared_ptr<const FullSystem> full)
    : full_(std::move(full)) {
  const FullSystem& fs = *full_;
  const CorrespondenceSet& corrs = fs.correspondences();
  const Eigen::MatrixXd& S = fs.S();
  const auto cols = S.cols();

  B_.resize(S.rows(), cols);
  pair_loc_.assign(static_cast<std::size_t>(corrs.pair_count()), {-1, -1});
  obs_loc_.assign(static_cast<std::size_t>(corrs.observation_count()), -1);
  obs_block_.assign(static_cast<std::size_t>(corrs.observation_count()), -1);
  factors_.reserve(fs.blocks().size());

  int row_offset = 0;
  for (std::size_t bi = 0; bi < fs.blocks().size(); ++bi) {
    const TrackBlock& block = fs.blocks()[bi];
    for (std::size_t k = 0; k < block.observations.size(); ++k) {
      obs_loc_[block.observations[k]] = static_cast<int>(k);
      obs_block_[block.observations[k]] = static_cast<int>(bi);
    }
    for (std::size_t k = 0; k < block.pairs.size(); ++k) {
      pair_loc_[block.pairs[k]] = {static_cast<int>(bi), static_cast<int>(k)};
    }

    TrackFactors f;
    f.P = block_P(corrs, block, obs_loc_);
    f.PtPinv = gram_inverse(f.P.transpose() * f.P, block);
    f.H = f.P * f.PtPinv;
    f.row_offset = row_offset;
    row_offset += 3 * static_cast<int>(block.pairs.size());

    const auto n = static_cast<Eigen::Index>(block.pairs.size());
    Eigen::MatrixXd Sb(3 * n, cols);
    for (Eigen::Index r = 0; r < n; ++r) {
      Sb.middleRows<3>(3 * r) = S.middleRows<3>(3 * block.pairs[r]);
    }
    const Eigen::MatrixXd Bb = Sb - f.H * (f.P.transpose() * Sb);
    for (Eigen::Index r = 0; r < n; ++r) {
      B_.middleRows<3>(3 * block.pairs[r]) = Bb.middleRows<3>(3 * r);
    }
    factors_.push_back(std::move(f));
  }
}

Eigen::MatrixXd ReducedSystem::dense_G() const {
  const auto rows = B_.rows();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(rows, rows);
  const auto& blocks = full_->blocks();
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const Eigen::MatrixXd Gb = factors_[bi].H * factors_[bi].P.transpose();
    const auto& pairs = blocks[bi].pairs;
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      for (std::size_t c = 0; c < pairs.size(); ++c) {
        G.block<3, 3>(3 * pairs[r], 3 * pairs[c]) =
            Gb.block<3, 3>(3 * static_cast<Eigen::Index>(r),
                           3 * static_cast<Eigen::Index>(c));
      }
    }
  }
  return G;
}

ReducedSystem reduce(std::shared_ptr<const FullSystem> full) {
  return ReducedSystem(std::move(full));
}

ReducedSystem reduce(const FullSystem& full) {
  return ReducedSystem(std::make_shared<const FullSystem>(full));
}

DepthEstimate recover_depths(const FullSystem& full,
                             const Eigen::VectorXd& y) {
  if (y.size() != full.S().cols()) {
    throw Error(ErrorCode::kInvalidArgument, "parameter vector size mismatch");
  }
  if (std::abs(y(y.size() - 1) - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument,
                "recover_depths expects a dehomogenized vector (y_last = 1)");
  }
  const CorrespondenceSet& corrs = full.correspondences();
  const Eigen::VectorXd Sy = full.S() * y;

  DepthEstimate out;
  out.lambda = Eigen::VectorXd::Zero(corrs.observation_count());
  std::vector<int> local_of(static_cast<std::size_t>(corrs.observation_count()),
                            -1);
  for (const TrackBlock& block : full.blocks()) {
    for (std::size_t k = 0; k < block.observations.size(); ++k) {
      local_of[block.observations[k]] = static_cast<int>(k);
    }
    const Eigen::MatrixXd P = block_P(corrs, block, local_of);
    const auto n = static_cast<Eigen::Index>(block.pairs.size());
    Eigen::VectorXd rhs(3 * n);
    for (Eigen::Index r = 0; r < n; ++r) {
      rhs.segment<3>(3 * r) = Sy.segment<3>(3 * block.pairs[r]);
    }
    const Eigen::MatrixXd PtPinv = gram_inverse(P.transpose() * P, block);
    const Eigen::VectorXd lambda = -PtPinv * (P.transpose() * rhs);
    bool negative = false;
    for (std::size_t k = 0; k < block.observations.size(); ++k) {
      out.lambda(block.observations[k]) = lambda(static_cast<Eigen::Index>(k));
      if (lambda(static_cast<Eigen::Index>(k)) < -1e-9) negative = true;
    }
    if (negative) out.negative_tracks.push_back(block.track_id);
  }
  return out;
}

Eigen::VectorXd solve_reduced_affine(const Eigen::MatrixXd& B) {
  const auto c = B.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B.leftCols(c - 1));
  if (qr.rank() < c - 1) {
    throw Error(ErrorCode::kRankDeficient,
                "reduced system has rank " + std::to_string(qr.rank()) +
                    " < " + std::to_string(c - 1));
  }
  Eigen::VectorXd y(c);
  y.head(c - 1) = qr.solve(-B.col(c - 1));
  y(c - 1) = 1.0;
  return y;
}

}  // namespace rsvio
