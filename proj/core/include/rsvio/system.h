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

// Linear velocity/gravity system built from two-view ray constraints.
//
// Every correspondence (a, b) between observations at scanlines i and j adds
// the three equations
//
//   xi_ab v0 + mu_ab g0 + kappa_ab + lambda_a p_a - lambda_b p_b = 0,
//
// i.e. one row triplet [xi I | mu I | kappa] of S and the entries +p_a, -p_b
// of P in the columns of the shared depths. Depth columns are eliminated per
// track with the projector G = P (P^T P)^-1 P^T, leaving B = (I - G) S with a
// fixed number of columns.

#pragma once

#include <array>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rsvio/geometry.h"

namespace rsvio {

struct Track {
  int id = 0;
  std::vector<Observation> observations;
};

struct TrackSet {
  std::vector<Track> tracks;
};

struct CameraFrame {
  int cam_id = 0;
  int frame = 0;
  friend bool operator==(const CameraFrame&, const CameraFrame&) = default;
};

using Pairing = std::vector<std::pair<CameraFrame, CameraFrame>>;

enum class PairPattern { kDense, kFirstAnchor };
enum class CameraSetup { kMono, kStereo };

/// Camera pairs fed into the system. Stereo links left views (cam 0) of frame
/// a to right views (cam 1) of later frames b > a; mono links left views only.
/// Dense uses every a < b, first-anchor only a = 0.
Pairing make_pairing(int frames, PairPattern pattern, CameraSetup setup);

/// Indices into CorrespondenceSet::observations. The first observation enters
/// P with +p, the second with -p.
struct Correspondence {
  int a = 0;
  int b = 0;
  int track_id = 0;
};

struct CorrespondenceOptions {
  /// Minimum |i - j| in scanlines; negative selects half a frame period.
  std::int64_t min_scanline_gap = -1;
};

/// Distinct observations with their rays; the observation index doubles as
/// the depth column index.
struct CorrespondenceSet {
  std::vector<Observation> observations;
  std::vector<Eigen::Vector3d> rays;      // N(p~), third coordinate 1
  std::vector<Eigen::Vector3d> raw_rays;  // p~ = R_i R_c K^-1 u
  std::vector<Eigen::Matrix3d> rotations; // R_i used for the ray
  std::vector<Eigen::Matrix3d> pixel_to_ray;  // R_i R_c K^-1
  std::vector<int> track_of;              // track id per observation
  std::vector<Correspondence> pairs;

  int pair_count() const { return static_cast<int>(pairs.size()); }
  int observation_count() const { return static_cast<int>(observations.size()); }
  int lambda_index(int observation) const { return observation; }
};

CorrespondenceSet build_correspondences(
    const TrackSet& tracks, const Pairing& pairing, const Geometry& geometry,
    const CorrespondenceOptions& options = {});

/// Keeps only the listed pairs (and the observations they reference).
CorrespondenceSet select_pairs(const CorrespondenceSet& corrs,
                               const std::vector<int>& pair_indices);

struct PairCoefficients {
  double xi = 0.0;                                 // s
  double mu = 0.0;                                 // s^2
  Eigen::Vector3d kappa = Eigen::Vector3d::Zero(); // m
};

PairCoefficients pair_coefficients(const ScanlineIntegrator& integrator,
                                   std::int64_t i, std::int64_t j,
                                   const Eigen::Matrix3d& R_i,
                                   const Eigen::Matrix3d& R_j,
                                   const Eigen::Vector3d& t_cam_i,
                                   const Eigen::Vector3d& t_cam_j);

PairCoefficients pair_coefficients(const Geometry& geometry,
                                   const Observation& a, const Observation& b);

/// Column layout of S and B: [v0 | g0 | e_a? | e_w? | 1].
struct ColumnLayout {
  bool accel_bias = false;
  bool gyro_bias = false;

  int cols() const { return 7 + (accel_bias ? 3 : 0) + (gyro_bias ? 3 : 0); }
  int accel_offset() const { return 6; }
  int gyro_offset() const { return accel_bias ? 9 : 6; }
  int homogeneous() const { return cols() - 1; }
  int params() const { return cols() - 1; }
};

/// Observations and pairs of one track; depth columns never couple tracks.
struct TrackBlock {
  int track_id = 0;
  std::vector<int> pairs;         // global pair indices
  std::vector<int> observations;  // global observation indices
};

/// Gyroscope-bias columns carry lambda_a dp_a/de - lambda_b dp_b/de, which
/// depends on the image points. The noise propagation needs its derivative.
struct GyroColumnModel {
  Eigen::VectorXd depth_prior;  // lambda per observation used in the columns
  /// d(dp/de_w)/du_x and d(dp/de_w)/du_y per observation.
  std::vector<std::array<Eigen::Matrix3d, 2>> dray_gyro_du;
};

class FullSystem {
 public:
  FullSystem(std::shared_ptr<const CorrespondenceSet> corrs, Eigen::MatrixXd S,
             ColumnLayout layout, std::vector<TrackBlock> blocks,
             std::optional<GyroColumnModel> gyro = std::nullopt);

  const Eigen::MatrixXd& S() const { return S_; }
  const CorrespondenceSet& correspondences() const { return *corrs_; }
  std::shared_ptr<const CorrespondenceSet> correspondences_ptr() const {
    return corrs_;
  }
  const ColumnLayout& layout() const { return layout_; }
  const std::vector<TrackBlock>& blocks() const { return blocks_; }
  const std::optional<GyroColumnModel>& gyro_model() const { return gyro_; }

  int pair_count() const { return corrs_->pair_count(); }
  int lambda_count() const { return corrs_->observation_count(); }

  /// Dense 3N x M ray matrix; intended for tests and small problems.
  Eigen::MatrixXd dense_P() const;
  /// Dense [S P].
  Eigen::MatrixXd dense_SP() const;

  /// Same system with the ray of one observation replaced. Used by the
  /// finite-difference oracles; S is left untouched.
  FullSystem with_ray(int observation, const Eigen::Vector3d& ray) const;

 private:
  std::shared_ptr<const CorrespondenceSet> corrs_;
  Eigen::MatrixXd S_;
  ColumnLayout layout_;
  std::vector<TrackBlock> blocks_;
  std::optional<GyroColumnModel> gyro_;
};

/// Pairs grouped by track, in order of first appearance.
std::vector<TrackBlock> group_blocks(const CorrespondenceSet& corrs);

/// Builds S and the implicit P; throws Error(kInsufficientData) when the
/// constraints cannot fix the parameters (3N - M < number of parameters).
FullSystem assemble(const CorrespondenceSet& corrs, const Geometry& geometry);

/// Per-track elimination factors.
struct TrackFactors {
  Eigen::MatrixXd P;      // 3n x m local ray matrix
  Eigen::MatrixXd PtPinv; // (P^T P)^-1
  Eigen::MatrixXd H;      // P (P^T P)^-1
  int row_offset = 0;     // first row of this block in the track-ordered B
};

class ReducedSystem {
 public:
  explicit ReducedSystem(std::shared_ptr<const FullSystem> full);

  /// 3N x C, row triplet alpha belongs to pair alpha.
  const Eigen::MatrixXd& B() const { return B_; }
  const FullSystem& full() const { return *full_; }
  std::shared_ptr<const FullSystem> full_ptr() const { return full_; }
  const std::vector<TrackFactors>& factors() const { return factors_; }

  int pair_count() const { return full_->pair_count(); }
  int cols() const { return static_cast<int>(B_.cols()); }
  /// Block index and local pair index of a global pair.
  std::pair<int, int> locate_pair(int pair) const { return pair_loc_[pair]; }
  /// Local column of a global observation inside its block.
  int local_observation(int observation) const { return obs_loc_[observation]; }
  int block_of_observation(int observation) const {
    return obs_block_[observation];
  }

  /// Dense G for the whole system, for tests.
  Eigen::MatrixXd dense_G() const;

 private:
  std::shared_ptr<const FullSystem> full_;
  Eigen::MatrixXd B_;
  std::vector<TrackFactors> factors_;
  std::vector<std::pair<int, int>> pair_loc_;
  std::vector<int> obs_loc_;
  std::vector<int> obs_block_;
};

/// Throws Error(kDegenerateTrack) naming the observation whose depth column
/// makes P^T P singular.
ReducedSystem reduce(std::shared_ptr<const FullSystem> full);
ReducedSystem reduce(const FullSystem& full);

struct DepthEstimate {
  Eigen::VectorXd lambda;             // per observation, along p (z-depth)
  std::vector<int> negative_tracks;   // cheirality warnings, not fatal
};

/// Least-squares depths for a fixed parameter vector y (last entry 1).
DepthEstimate recover_depths(const FullSystem& full, const Eigen::VectorXd& y);

/// Minimizer of ||B [theta; 1]|| over theta (affine normalization y_C = 1).
Eigen::VectorXd solve_reduced_affine(const Eigen::MatrixXd& B);

}  // namespace rsvio
