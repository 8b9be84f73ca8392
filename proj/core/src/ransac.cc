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

#include "rsvio/ransac.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "rsvio/error.h"
#include "rsvio/estimators.h"
#include "rsvio/noise.h"

namespace rsvio {
namespace {

struct PairFit {
  double score = 0.0;  // normalized distance
  Eigen::Vector2d lambda = Eigen::Vector2d::Constant(
      std::numeric_limits<double>::quiet_NaN());
};

std::vector<PairFit> fit_pairs(const FullSystem& full, const Eigen::VectorXd& y,
                               double sigma_px) {
  const CorrespondenceSet& corrs = full.correspondences();
  const Eigen::VectorXd Sy = full.S() * y;
  std::vector<PairFit> out(static_cast<std::size_t>(corrs.pair_count()));
  for (int r = 0; r < corrs.pair_count(); ++r) {
    const Correspondence& c = corrs.pairs[r];
    const Eigen::Vector3d& pa = corrs.rays[c.a];
    const Eigen::Vector3d& pb = corrs.rays[c.b];
    const Eigen::Vector3d offset = Sy.segment<3>(3 * r);
    Eigen::Vector3d n = pa.cross(pb);
    if (n.norm() < 1e-12 * pa.norm() * pb.norm()) {
      // Parallel rays: distance of the offset from the common direction.
      const Eigen::Vector3d d = pa.normalized();
      n = (offset - offset.dot(d) * d);
      if (n.norm() == 0.0) continue;
    }
    n.normalize();
    const double dist = std::abs(offset.dot(n));

    // Depths of the closest points: offset + la pa - lb pb ~ 0.
    Eigen::Matrix<double, 3, 2> A;
    A << pa, -pb;
    const Eigen::Vector2d lambda =
        (A.transpose() * A).ldlt().solve(-A.transpose() * offset);
    out[r].lambda = lambda;
    if (lambda(0) <= 0.0 || lambda(1) <= 0.0) {
      out[r].score = std::numeric_limits<double>::infinity();
      continue;
    }
    const Eigen::Vector2d ga =
        ray_pixel_jacobian(corrs, c.a).transpose() * n.head<2>();
    const Eigen::Vector2d gb =
        ray_pixel_jacobian(corrs, c.b).transpose() * n.head<2>();
    const double var = lambda(0) * lambda(0) * ga.squaredNorm() +
                       lambda(1) * lambda(1) * gb.squaredNorm();
    const double sd = sigma_px * std::sqrt(std::max(var, 1e-30));
    out[r].score = dist / sd;
  }
  return out;
}

/// Largest per-pair chi-square of the track-reduced residual B y under
/// pixel noise sigma_px over the pairs of `track`. Depth elimination and the
/// noise propagation act per track, so `padding` pairs from other tracks
/// only make the system large enough to assemble and do not change the
/// result.
double track_chi2(const CorrespondenceSet& corrs, const Geometry& geometry,
                  int track, const std::vector<int>& pairs,
                  const std::vector<int>& padding, const Eigen::VectorXd& y,
                  double sigma_px) {
  std::vector<int> all = pairs;
  all.insert(all.end(), padding.begin(), padding.end());
  auto full = std::make_shared<const FullSystem>(
      assemble(select_pairs(corrs, all), geometry));
  const ReducedSystem reduced(full);
  const RowCovariances covs = propagate(reduced, PointNoiseModel{});
  const Eigen::VectorXd r = reduced.B() * y;
  const CorrespondenceSet& sub = full->correspondences();
  double worst = 0.0;
  for (int a = 0; a < reduced.pair_count(); ++a) {
    if (sub.pairs[static_cast<std::size_t>(a)].track_id != track) continue;
    const Eigen::Vector3d b = r.segment<3>(3 * a);
    const Eigen::Matrix3d W =
        truncated_pinv(covs.pairs[static_cast<std::size_t>(a)].quadratic(y),
                       RenormOptions{}.rank_ratio)
            .W;
    worst = std::max(worst, b.dot(W * b));
  }
  return worst / (sigma_px * sigma_px);
}

}  // namespace

std::vector<double> pair_residuals(const FullSystem& full,
                                   const Eigen::VectorXd& y, double sigma_px) {
  std::vector<double> out;
  for (const PairFit& f : fit_pairs(full, y, sigma_px)) out.push_back(f.score);
  return out;
}

RansacResult ransac_prune(const CorrespondenceSet& corrs,
                          const Geometry& geometry, const RansacOptions& opts) {
  if (corrs.pair_count() < opts.sample_size) {
    throw Error(ErrorCode::kInsufficientData,
                "need >= 6 correspondences for RANSAC, got " +
                    std::to_string(corrs.pair_count()));
  }
  const FullSystem full = assemble(corrs, geometry);

  std::map<int, std::vector<int>> by_track;
  for (int r = 0; r < corrs.pair_count(); ++r) {
    by_track[corrs.pairs[r].track_id].push_back(r);
  }
  std::vector<int> track_ids;
  for (const auto& [id, pairs] : by_track) track_ids.push_back(id);
  if (static_cast<int>(track_ids.size()) < opts.sample_size) {
    throw Error(ErrorCode::kInsufficientData,
                "minimal samples need " + std::to_string(opts.sample_size) +
                    " distinct tracks");
  }

  std::mt19937_64 rng(opts.seed);
  std::vector<int> best_inliers;
  Eigen::VectorXd best_model;
  std::vector<int> sample;
  for (int it = 0; it < opts.iterations; ++it) {
    std::shuffle(track_ids.begin(), track_ids.end(), rng);
    sample.clear();
    for (int k = 0; k < opts.sample_size; ++k) {
      const auto& pairs = by_track[track_ids[static_cast<std::size_t>(k)]];
      std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
      sample.push_back(pairs[pick(rng)]);
    }
    Eigen::VectorXd y;
    try {
      const CorrespondenceSet sub = select_pairs(corrs, sample);
      y = solve_reduced_affine(reduce(assemble(sub, geometry)).B());
    } catch (const Error&) {
      continue;
    }
    const std::vector<double> res = pair_residuals(full, y, opts.sigma_assumed);
    std::vector<int> inliers;
    for (int r = 0; r < corrs.pair_count(); ++r) {
      if (res[static_cast<std::size_t>(r)] < opts.threshold) inliers.push_back(r);
    }
    if (inliers.size() > best_inliers.size()) {
      best_inliers = std::move(inliers);
      best_model = y;
    }
  }
  if (static_cast<int>(best_inliers.size()) < opts.sample_size) {
    throw Error(ErrorCode::kInsufficientData,
                "no model with >= 6 inliers");
  }
  // Optional refit on the consensus set, re-classifying against the result.
  for (int round = 0; round < opts.refit_rounds; ++round) {
    Eigen::VectorXd y;
    try {
      y = solve_reduced_affine(
          reduce(assemble(select_pairs(corrs, best_inliers), geometry)).B());
    } catch (const Error&) {
      break;
    }
    const std::vector<double> res = pair_residuals(full, y, opts.sigma_assumed);
    std::vector<int> inliers;
    for (int r = 0; r < corrs.pair_count(); ++r) {
      if (res[static_cast<std::size_t>(r)] < opts.threshold) inliers.push_back(r);
    }
    if (inliers.size() < best_inliers.size()) break;
    best_inliers = std::move(inliers);
    best_model = y;
  }

  // Observation vote: drop every pair touching an observation that fails in
  // most of its pairs. The second pass only counts pairs whose partner
  // survived the first, so good observations next to outliers are kept.
  const std::vector<double> res =
      pair_residuals(full, best_model, opts.sigma_assumed);
  const auto n_obs = static_cast<std::size_t>(corrs.observation_count());
  auto vote = [&](const std::vector<char>* partner_ok) {
    std::vector<int> pass(n_obs, 0), total(n_obs, 0);
    for (int r = 0; r < corrs.pair_count(); ++r) {
      const bool ok = res[static_cast<std::size_t>(r)] < opts.threshold;
      const int ends[2] = {corrs.pairs[r].a, corrs.pairs[r].b};
      for (int e = 0; e < 2; ++e) {
        const auto self = static_cast<std::size_t>(ends[e]);
        const auto other = static_cast<std::size_t>(ends[1 - e]);
        if (partner_ok && !(*partner_ok)[other]) continue;
        ++total[self];
        if (ok) ++pass[self];
      }
    }
    std::vector<char> trusted(n_obs, 1);
    for (std::size_t o = 0; o < n_obs; ++o) {
      if (total[o] > 0) trusted[o] = 2 * pass[o] > total[o];
    }
    return trusted;
  };
  const std::vector<char> first = vote(nullptr);
  const std::vector<char> second = vote(&first);
  auto trusted = [&](int o) {
    return second[static_cast<std::size_t>(o)] != 0;
  };
  std::erase_if(best_inliers, [&](int r) {
    return !trusted(corrs.pairs[r].a) || !trusted(corrs.pairs[r].b);
  });

  // Depth consistency for pairs with an isolated endpoint, i.e. one whose
  // other pairs all failed: the partner's implied depth has to agree with
  // the median over the partner's other kept pairs.
  const std::vector<PairFit> fits =
      fit_pairs(full, best_model, opts.sigma_assumed);
  std::vector<int> input_pairs(n_obs, 0);
  for (const Correspondence& c : corrs.pairs) {
    ++input_pairs[static_cast<std::size_t>(c.a)];
    ++input_pairs[static_cast<std::size_t>(c.b)];
  }
  std::vector<std::vector<std::pair<int, double>>> depths(n_obs);
  for (int r : best_inliers) {
    const auto& f = fits[static_cast<std::size_t>(r)];
    depths[static_cast<std::size_t>(corrs.pairs[r].a)].push_back({r, f.lambda(0)});
    depths[static_cast<std::size_t>(corrs.pairs[r].b)].push_back({r, f.lambda(1)});
  }
  auto isolated = [&](int o) {
    const auto k = static_cast<std::size_t>(o);
    return depths[k].size() == 1 && input_pairs[k] > 1;
  };
  auto consistent = [&](int o, int r) {
    const auto& list = depths[static_cast<std::size_t>(o)];
    std::vector<double> others;
    double own = 0.0;
    for (const auto& [q, l] : list) {
      if (q == r) {
        own = l;
      } else {
        others.push_back(l);
      }
    }
    if (others.empty()) return false;
    auto mid = others.begin() + static_cast<std::ptrdiff_t>(others.size() / 2);
    std::nth_element(others.begin(), mid, others.end());
    return std::abs(own - *mid) <= opts.depth_tolerance * *mid;
  };
  std::vector<char> drop(static_cast<std::size_t>(corrs.pair_count()), 0);
  for (int r : best_inliers) {
    const Correspondence& c = corrs.pairs[r];
    const bool bad = (isolated(c.a) && !consistent(c.b, r)) ||
                     (isolated(c.b) && !consistent(c.a, r));
    drop[static_cast<std::size_t>(r)] = bad ? 1 : 0;
  }
  std::erase_if(best_inliers,
                [&](int r) { return drop[static_cast<std::size_t>(r)] != 0; });

  // Track screening: depth elimination mixes all pairs of a track, so one
  // bad observation shows up in the reduced residual of its neighbours.
  // Drop the observation that helps most until the track passes.
  if (opts.track_threshold > 0.0) {
    const double limit = opts.track_threshold * opts.track_threshold;
    std::map<int, std::vector<int>> kept_by_track;
    for (int r : best_inliers) kept_by_track[corrs.pairs[r].track_id].push_back(r);
    // Constraint surplus 3 n - m of every kept track, largest first.
    std::vector<std::pair<int, int>> surplus;
    for (const auto& [id, pairs] : kept_by_track) {
      std::set<int> obs;
      for (int r : pairs) {
        obs.insert(corrs.pairs[r].a);
        obs.insert(corrs.pairs[r].b);
      }
      surplus.push_back(
          {3 * static_cast<int>(pairs.size()) - static_cast<int>(obs.size()), id});
    }
    std::sort(surplus.rbegin(), surplus.rend());
    auto padding_for = [&](int track) {
      std::vector<int> pad;
      int total = 0;
      for (const auto& [extra, id] : surplus) {
        if (id == track) continue;
        const auto& ps = kept_by_track.at(id);
        pad.insert(pad.end(), ps.begin(), ps.end());
        total += extra;
        if (total >= 6) break;
      }
      return pad;
    };

    std::vector<int> screened;
    for (auto& [id, pairs] : kept_by_track) {
      const std::vector<int> padding = padding_for(id);
      auto chi2 = [&](const std::vector<int>& ps) {
        try {
          return track_chi2(corrs, geometry, id, ps, padding, best_model,
                            opts.sigma_assumed);
        } catch (const Error&) {
          return std::numeric_limits<double>::infinity();
        }
      };
      double current = pairs.size() > 1 ? chi2(pairs) : 0.0;
      while (current > limit && pairs.size() > 1) {
        std::set<int> observations;
        for (int r : pairs) {
          observations.insert(corrs.pairs[r].a);
          observations.insert(corrs.pairs[r].b);
        }
        double best = std::numeric_limits<double>::infinity();
        std::vector<int> best_pairs;
        for (int o : observations) {
          std::vector<int> rest;
          for (int r : pairs) {
            if (corrs.pairs[r].a != o && corrs.pairs[r].b != o) rest.push_back(r);
          }
          if (rest.empty()) continue;
          const double c = rest.size() > 1 ? chi2(rest) : 0.0;
          if (c < best) {
            best = c;
            best_pairs = std::move(rest);
          }
        }
        if (best_pairs.empty()) {
          pairs.clear();
          break;
        }
        pairs = std::move(best_pairs);
        current = best;
      }
      if (current <= limit) screened.insert(screened.end(), pairs.begin(), pairs.end());
    }
    std::sort(screened.begin(), screened.end());
    best_inliers = std::move(screened);
  }
  if (static_cast<int>(best_inliers.size()) < opts.sample_size) {
    throw Error(ErrorCode::kInsufficientData,
                "no model with >= 6 inliers");
  }

  RansacResult out;
  out.inliers = select_pairs(corrs, best_inliers);
  out.inlier_pairs = std::move(best_inliers);
  out.model = best_model;
  return out;
}

}  // namespace rsvio
