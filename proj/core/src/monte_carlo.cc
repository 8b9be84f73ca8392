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

#include "rsvio/monte_carlo.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <thread>

#include "rsvio/error.h"

namespace rsvio {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

void mean_std(const std::vector<double>& v, double* mean, double* sd) {
  *mean = 0.0;
  *sd = 0.0;
  if (v.empty()) return;
  for (double x : v) *mean += x;
  *mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  for (double x : v) *sd += (x - *mean) * (x - *mean);
  *sd = std::sqrt(*sd / static_cast<double>(v.size() - 1));
}

/// Predicted std of ||v0 - v0_gt|| and of the gravity angle (deg).
void predicted_std(const InitEstimate& est, const Eigen::Matrix<double, 6, 6>& cov,
                   double* sv, double* sg) {
  *sv = std::sqrt(std::max(0.0, cov.topLeftCorner<3, 3>().trace()));
  const double gn = est.g0.norm();
  if (gn <= 0.0) {
    *sg = 0.0;
    return;
  }
  const Eigen::Vector3d d = est.g0 / gn;
  const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - d * d.transpose();
  const double var = (P * cov.bottomRightCorner<3, 3>() * P).trace();
  *sg = std::sqrt(std::max(0.0, var)) / gn * 180.0 / std::numbers::pi;
}

struct Task {
  double sigma;
  int window;
  int trial;
};

class TrialRunner {
 public:
  TrialRunner(const MonteCarloConfig& cfg, const std::vector<Scenario>& scenes)
      : cfg_(cfg), scenes_(scenes) {
    opts_ = cfg.pipeline;
    opts_.pairing = cfg.scenario.pairing;
    opts_.camera = cfg.scenario.camera;
    opts_.shutter = cfg.scenario.shutter;
    opts_.frames = cfg.scenario.frames;
  }

  std::vector<TrialResult> run(const Task& task) const {
    const Scenario& scene = scenes_[static_cast<std::size_t>(task.window)];
    ScenarioConfig sc = cfg_.scenario;
    sc.sigma_px = task.sigma;
    const std::uint64_t seed =
        trial_seed(cfg_.scenario.seed, task.sigma, task.window, task.trial);

    std::vector<TrialResult> out;
    for (Method m : cfg_.methods) {
      TrialResult r;
      r.sigma = task.sigma;
      r.window = task.window;
      r.trial = task.trial;
      r.method = m;
      out.push_back(r);
    }

    std::optional<Problem> problem;
    try {
      NoisyData noisy = perturb(scene, sc, seed);
      if (cfg_.outlier_fraction > 0.0) {
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        inject_outliers(noisy.tracks,
                        make_pairing(opts_.frames, opts_.pairing, opts_.camera),
                        scene.calib, cfg_.outlier_fraction, rng);
      }
      problem = prepare(noisy.imu, scene.calib, noisy.tracks, opts_, noisy.jitter);
    } catch (const std::exception& e) {
      for (TrialResult& r : out) r.error = e.what();
      return out;
    }

    std::map<Method, InitEstimate> linear;
    auto linear_estimate = [&](Method m) -> const InitEstimate& {
      auto it = linear.find(m);
      if (it == linear.end()) {
        it = linear.emplace(m, rsvio::solve(*problem, m, opts_).estimate).first;
      }
      return it->second;
    };

    for (TrialResult& r : out) {
      try {
        InitEstimate est;
        if (r.method == Method::kBa) {
          const BaProblem pb = make_ba_problem(problem->full, problem->geometry);
          est = refine_lm(pb, linear_estimate(opts_.ba_init), opts_.ba).estimate;
        } else {
          est = linear_estimate(r.method);
        }
        fill(est, scene, task.sigma, &r);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
    return out;
  }

 private:
  static void fill(const InitEstimate& est, const Scenario& scene, double sigma,
                   TrialResult* r) {
    const ErrorMetrics e = error_metrics(est, scene);
    r->ok = true;
    r->converged = est.converged;
    r->eps_v = e.eps_v;
    r->eps_g = e.eps_g;
    r->iterations = est.iterations;
    r->sigma_hat = est.sigma_hat;
    r->v_error = est.v0 - scene.v0;
    r->g_error = est.g0 - scene.g0;
    if (est.has_covariance()) {
      const Eigen::Matrix<double, 6, 6> cov = est.cov.topLeftCorner<6, 6>();
      predicted_std(est, cov, &r->pred_std_v, &r->pred_std_g);
      if (est.cov_unit.rows() >= 6) {
        r->pred_component_std =
            (sigma * sigma * est.cov_unit.topLeftCorner<6, 6>().diagonal())
                .cwiseMax(0.0)
                .cwiseSqrt();
      }
    }
  }

  const MonteCarloConfig& cfg_;
  const std::vector<Scenario>& scenes_;
  PipelineOptions opts_;
};

}  // namespace

const Aggregate& MonteCarloResult::at(double sigma, Method method) const {
  for (const Aggregate& a : aggregates) {
    if (a.method == method && std::abs(a.sigma - sigma) < 1e-12) return a;
  }
  throw Error(ErrorCode::kOutOfRange, "no aggregate for this sigma and method");
}

std::vector<Aggregate> aggregate(const std::vector<TrialResult>& trials) {
  std::vector<std::pair<double, Method>> keys;
  std::map<std::pair<double, Method>, std::vector<const TrialResult*>> groups;
  for (const TrialResult& t : trials) {
    const auto key = std::make_pair(t.sigma, t.method);
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) keys.push_back(key);
    it->second.push_back(&t);
  }

  std::vector<Aggregate> out;
  for (const auto& key : keys) {
    Aggregate a;
    a.sigma = key.first;
    a.method = key.second;
    std::vector<double> ev, eg, it, sh, pv, pg;
    std::vector<std::vector<double>> comp(6), pred(6);
    for (const TrialResult* t : groups[key]) {
      if (!t->ok) {
        ++a.failures;
        continue;
      }
      ev.push_back(t->eps_v);
      eg.push_back(t->eps_g);
      it.push_back(t->iterations);
      sh.push_back(t->sigma_hat);
      pv.push_back(t->pred_std_v);
      pg.push_back(t->pred_std_g);
      for (int k = 0; k < 3; ++k) {
        comp[static_cast<std::size_t>(k)].push_back(t->v_error(k));
        comp[static_cast<std::size_t>(k + 3)].push_back(t->g_error(k));
      }
      for (int k = 0; k < 6; ++k) {
        pred[static_cast<std::size_t>(k)].push_back(t->pred_component_std(k));
      }
    }
    a.count = static_cast<int>(ev.size());
    mean_std(ev, &a.mean_eps_v, &a.std_eps_v);
    mean_std(eg, &a.mean_eps_g, &a.std_eps_g);
    a.median_eps_v = median(ev);
    a.median_eps_g = median(eg);
    double unused = 0.0;
    mean_std(it, &a.mean_iterations, &unused);
    a.median_iterations = median(it);
    a.median_sigma_hat = median(sh);
    mean_std(pv, &a.mean_pred_std_v, &unused);
    mean_std(pg, &a.mean_pred_std_g, &unused);
    for (int k = 0; k < 6; ++k) {
      double m = 0.0, sd = 0.0;
      mean_std(comp[static_cast<std::size_t>(k)], &m, &sd);
      a.empirical_component_std(k) = sd;
      mean_std(pred[static_cast<std::size_t>(k)], &m, &unused);
      a.predicted_component_std(k) = m;
    }
    out.push_back(a);
  }
  return out;
}

MonteCarloResult run_monte_carlo(const MonteCarloConfig& cfg) {
  if (cfg.trials < 1 || cfg.windows < 1 || cfg.sigmas.empty() ||
      cfg.methods.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "need at least one sigma, method, window and trial");
  }
  for (double s : cfg.sigmas) {
    if (!(s >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");
  }

  std::vector<Scenario> scenes;
  for (int w = 0; w < cfg.windows; ++w) {
    scenes.push_back(generate_scenario(cfg.trajectory, cfg.scenario, w));
  }

  std::vector<Task> tasks;
  for (double s : cfg.sigmas) {
    for (int w = 0; w < cfg.windows; ++w) {
      for (int t = 0; t < cfg.trials; ++t) tasks.push_back({s, w, t});
    }
  }

  const TrialRunner runner(cfg, scenes);
  std::vector<std::vector<TrialResult>> slots(tasks.size());
  int jobs = cfg.jobs > 0 ? cfg.jobs
                          : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::clamp(jobs, 1, static_cast<int>(tasks.size()));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      slots[i] = runner.run(tasks[i]);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  MonteCarloResult result;
  for (auto& slot : slots) {
    for (TrialResult& r : slot) result.trials.push_back(std::move(r));
  }
  result.aggregates = aggregate(result.trials);
  return result;
}

}  // namespace rsvio
