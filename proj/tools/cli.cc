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

#include "cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "rsvio/error.h"
#include "rsvio/io.h"
#include "rsvio/pipeline.h"

namespace rsvio::cli {
namespace {

namespace fs = std::filesystem;

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  }
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "output directory '" + dir + "' is not writable");
  }
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_method(item));
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, "empty method list");
  return out;
}

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) {
      throw Error(ErrorCode::kInvalidArgument, "invalid number '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

Eigen::Vector3d parse_vec3(const std::string& s) {
  const std::vector<double> v = parse_doubles(s);
  if (v.size() != 3) {
    throw Error(ErrorCode::kInvalidArgument, "expected three comma-separated numbers");
  }
  return {v[0], v[1], v[2]};
}

Variant variant(std::string name, std::vector<Method> methods) {
  Variant v;
  v.name = std::move(name);
  v.methods = std::move(methods);
  return v;
}

const std::vector<double> kDefaultSigmas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};

}  // namespace

std::vector<std::string> preset_names() {
  return {"paper-fig3", "paper-fig4", "paper-fig5", "paper-fig6", "paper-fig7"};
}

Preset find_preset(const std::string& name) {
  Preset p;
  p.id = name;
  p.sigmas = kDefaultSigmas;
  p.trajectory.kind = TrajectoryKind::kForward;
  const std::vector<Method> three = {Method::kLs, Method::kRenorm, Method::kBa};
  if (name == "paper-fig3") {
    p.plot = "fig3";
    p.variants = {variant("stereo-dense", three)};
  } else if (name == "paper-fig4") {
    p.plot = "fig4";
    p.variants = {variant("stereo-dense", {Method::kLs, Method::kIterReweight,
                                           Method::kTaubin, Method::kRenorm})};
  } else if (name == "paper-fig5") {
    p.plot = "fig5";
    p.variants = {variant("rs", three), variant("gs-on-rs", three)};
    p.variants[1].scenario.shutter = ShutterModel::kGlobalOnRolling;
  } else if (name == "paper-fig6") {
    p.plot = "fig6";
    p.variants = {variant("stereo", three), variant("mono", three)};
    p.variants[1].scenario.camera = CameraSetup::kMono;
  } else if (name == "paper-fig7") {
    p.plot = "fig7";
    p.variants = {variant("dense", three), variant("first-anchor", three)};
    p.variants[1].scenario.pairing = PairPattern::kFirstAnchor;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown preset '" + name + "'");
  }
  return p;
}

int cmd_simulate(const SimulateConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.out_dir);
  const Scenario scene = generate_scenario(cfg.trajectory, cfg.scenario, cfg.window);
  ImuStream imu = scene.imu;
  TrackSet tracks = scene.tracks;
  const bool noisy = cfg.scenario.sigma_px > 0.0 ||
                     cfg.scenario.accel_bias.squaredNorm() > 0.0 ||
                     cfg.scenario.gyro_bias.squaredNorm() > 0.0;
  if (noisy) {
    // Rotation jitter has no file representation; only pixel and IMU noise
    // reach the dataset.
    ScenarioConfig sc = cfg.scenario;
    sc.rot_noise_deg = 0.0;
    NoisyData nd = perturb(scene, sc, trial_seed(sc.seed, sc.sigma_px, cfg.window, 0));
    imu = std::move(nd.imu);
    tracks = std::move(nd.tracks);
  }
  const fs::path dir(cfg.out_dir);
  {
    auto out = open_out(dir / "imu.csv");
    io::write_imu_csv(out, imu);
  }
  {
    auto out = open_out(dir / "calib.json");
    io::write_calibration(out, scene.calib);
  }
  {
    io::TrackFile tf;
    tf.tracks = tracks;
    tf.pairing = cfg.scenario.pairing;
    tf.camera = cfg.scenario.camera;
    tf.frames = cfg.scenario.frames;
    auto out = open_out(dir / "tracks.json");
    io::write_tracks(out, tf);
  }
  {
    auto out = open_out(dir / "gt.json");
    io::write_ground_truth(out, io::ground_truth(scene));
  }
  log << "wrote " << scene.tracks.tracks.size() << " tracks, " << imu.size()
      << " IMU samples to " << cfg.out_dir << "\n";
  return kOk;
}

int cmd_solve(const SolveConfig& cfg, std::ostream& log) {
  ImuStream imu;
  RigCalibration calib;
  io::TrackFile tf;
  {
    auto in = open_in(cfg.imu_path);
    imu = io::read_imu_csv(in, cfg.imu_path);
  }
  {
    auto in = open_in(cfg.calib_path);
    calib = io::read_calibration(in, cfg.calib_path);
  }
  {
    auto in = open_in(cfg.tracks_path);
    tf = io::read_tracks(in, cfg.tracks_path);
  }

  PipelineOptions opts;
  opts.pairing = cfg.pairing.value_or(tf.pairing.value_or(PairPattern::kDense));
  opts.camera = cfg.camera.value_or(tf.camera.value_or(
      calib.cameras.size() >= 2 ? CameraSetup::kStereo : CameraSetup::kMono));
  opts.shutter = cfg.shutter;
  opts.frames = cfg.frames.value_or(tf.frames.value_or(0));
  opts.bias.model_accel = cfg.model_accel_bias;
  opts.bias.model_gyro = cfg.model_gyro_bias;
  if (cfg.ransac) {
    opts.ransac = RansacOptions{};
    opts.ransac->refit_rounds = cfg.ransac_refit;
  }

  const Problem problem = prepare(imu, calib, tf.tracks, opts);
  spdlog::info("{} of {} pairs used, {} columns", problem.full->pair_count(),
               problem.input_pairs, problem.full->layout().cols());
  if (!cfg.jacobian_path.empty()) {
    auto out = open_out(cfg.jacobian_path);
    io::write_jacobian_csv(out, problem.covs);
  }

  const std::vector<SolveOutput> results = solve_all(problem, cfg.methods, opts);
  // Standard output carries the JSON when no file is given.
  std::ostream& summary = cfg.out_path.empty() ? std::cerr : log;
  std::vector<InitEstimate> estimates;
  bool converged = true;
  for (const SolveOutput& r : results) {
    estimates.push_back(r.estimate);
    converged = converged && r.estimate.converged;
    summary << to_string(r.estimate.method) << ": v0 = "
        << r.estimate.v0.transpose() << ", g0 = " << r.estimate.g0.transpose()
        << ", iterations " << r.estimate.iterations
        << (r.estimate.converged ? "" : " (not converged)") << "\n";
    if (!r.trace.empty() && !cfg.trace_path.empty()) {
      auto out = open_out(cfg.trace_path);
      io::write_trace_csv(out, r.trace);
    }
  }
  if (cfg.out_path.empty()) {
    io::write_estimates(std::cout, estimates);
  } else {
    auto out = open_out(cfg.out_path);
    io::write_estimates(out, estimates);
  }
  if (!converged) {
    spdlog::warn("at least one estimator did not converge");
    return kDiverged;
  }
  return kOk;
}

int cmd_benchmark(const BenchmarkConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.out_dir);
  const fs::path dir(cfg.out_dir);
  const Preset& p = cfg.preset;
  const bool single = p.variants.size() == 1;

  auto plot = open_out(dir / ("plot_" + (p.plot.empty() ? "custom" : p.plot) + ".csv"));
  plot << "variant,sigma,method,mean_eps_v,std_eps_v,mean_eps_g,std_eps_g,"
          "mean_pred_std_v,mean_pred_std_g\n";

  for (const Variant& v : p.variants) {
    MonteCarloConfig mc;
    mc.trajectory = p.trajectory;
    mc.scenario = v.scenario;
    mc.sigmas = p.sigmas;
    mc.trials = p.trials;
    mc.windows = cfg.windows;
    mc.methods = v.methods;
    mc.jobs = cfg.jobs;
    mc.outlier_fraction = cfg.outlier_fraction;
    if (cfg.ransac) {
      mc.pipeline.ransac = RansacOptions{};
      mc.pipeline.ransac->refit_rounds = cfg.ransac_refit;
    }

    spdlog::info("{}: {} sigmas x {} windows x {} trials", v.name, mc.sigmas.size(),
                 mc.windows, mc.trials);
    const MonteCarloResult res = run_monte_carlo(mc);
    const std::string suffix = single ? "" : "_" + v.name;
    {
      auto out = open_out(dir / ("trials" + suffix + ".csv"));
      io::write_trials_csv(out, res.trials);
    }
    {
      auto out = open_out(dir / ("aggregate" + suffix + ".csv"));
      io::write_aggregate_csv(out, res.aggregates);
    }
    for (const Aggregate& a : res.aggregates) {
      plot << v.name << ',' << a.sigma << ',' << to_string(a.method) << ','
           << a.mean_eps_v << ',' << a.std_eps_v << ',' << a.mean_eps_g << ','
           << a.std_eps_g << ',' << a.mean_pred_std_v << ',' << a.mean_pred_std_g
           << '\n';
      log << v.name << "  sigma " << a.sigma << "  " << to_string(a.method)
          << "  eps_v " << a.mean_eps_v << "  eps_g " << a.mean_eps_g
          << "  iters " << a.median_iterations
          << (a.failures ? "  failures " + std::to_string(a.failures) : "")
          << "\n";
    }
  }
  return kOk;
}

int cmd_compare(const CompareConfig& cfg, std::ostream& log) {
  std::vector<InitEstimate> est;
  io::GroundTruth gt;
  {
    auto in = open_in(cfg.estimate_path);
    est = io::read_estimates(in, cfg.estimate_path);
  }
  {
    auto in = open_in(cfg.gt_path);
    gt = io::read_ground_truth(in, cfg.gt_path);
  }
  std::ostream& summary = cfg.out_path.empty() ? std::cerr : log;
  nlohmann::json out = nlohmann::json::array();
  for (const InitEstimate& e : est) {
    const ErrorMetrics m = error_metrics(e.v0, e.g0, gt.v0, gt.g0);
    out.push_back({{"method", to_string(e.method)},
                   {"eps_v", m.eps_v},
                   {"eps_g", m.eps_g}});
    summary << to_string(e.method) << ": eps_v " << m.eps_v << " m/s, eps_g "
        << m.eps_g << " deg\n";
  }
  if (cfg.out_path.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    auto f = open_out(cfg.out_path);
    f << out.dump(2) << '\n';
  }
  return kOk;
}

void init_logging() {
  if (spdlog::get("rsvio") == nullptr) {
    auto logger = spdlog::stderr_color_mt("rsvio");
    spdlog::set_default_logger(logger);
  }
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("RSVIO_LOG")) {
    spdlog::cfg::helpers::load_levels(env);
  }
}

int run(int argc, const char* const* argv) {
  init_logging();

  CLI::App app{"Rolling-shutter visual-inertial initialization"};
  app.require_subcommand(1);

  // Options shared by several subcommands.
  std::string methods, preset, sigma, pairing, camera, shutter = "rs", out;
  std::string trajectory = "forward", accel_bias, gyro_bias;
  int trials = 100, frames = 5, jobs = 0, windows = 1, window = 0;
  int ransac_refit = 0;
  std::uint64_t seed = 1;
  bool model_accel = false, model_gyro = false, no_ransac = false, ransac = false;
  double outliers = 0.0;

  auto* sim = app.add_subcommand("simulate", "Write a synthetic dataset");
  sim->add_option("--trajectory", trajectory,
                  "static, forward, loop, shake, forward-back");
  sim->add_option("--sigma", sigma, "Pixel noise std");
  sim->add_option("--frames", frames, "Frames in the window");
  sim->add_option("--window", window, "Sliding-window index");
  sim->add_option("--pairing", pairing, "dense or first-anchor");
  sim->add_option("--camera", camera, "mono or stereo");
  sim->add_option("--accel-bias", accel_bias, "Injected accelerometer bias x,y,z");
  sim->add_option("--gyro-bias", gyro_bias, "Injected gyroscope bias x,y,z");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--out", out, "Output directory")->required();

  std::string imu_path, tracks_path, calib_path, trace_path, jac_path;
  auto* solve = app.add_subcommand("solve", "Estimate v0 and g0 from files");
  solve->add_option("--imu", imu_path, "IMU CSV")->required();
  solve->add_option("--tracks", tracks_path, "Tracks JSON")->required();
  solve->add_option("--calib", calib_path, "Calibration JSON")->required();
  solve->add_option("--method", methods, "Comma list: ls,iter-reweight,taubin,renorm,ba");
  solve->add_option("--pairing", pairing, "dense or first-anchor");
  solve->add_option("--camera", camera, "mono or stereo");
  solve->add_option("--shutter", shutter, "rs or gs-on-rs");
  solve->add_option("--frames", frames, "Frames to pair");
  solve->add_flag("--model-accel-bias", model_accel, "Estimate accelerometer bias");
  solve->add_flag("--model-gyro-bias", model_gyro, "Estimate gyroscope bias");
  solve->add_flag("--no-ransac", no_ransac, "Skip outlier pruning");
  solve->add_option("--ransac-refit", ransac_refit,
                    "Consensus refit rounds after RANSAC (default 0)");
  solve->add_option("--out", out, "Estimate JSON (default: stdout)");
  solve->add_option("--trace", trace_path, "BA cost trace CSV");
  solve->add_option("--dump-jacobians", jac_path, "Row Jacobians CSV (debug)");

  auto* bench = app.add_subcommand("benchmark", "Monte-Carlo experiment");
  bench->add_option("--preset", preset, "paper-fig3 ... paper-fig7");
  bench->add_option("--method", methods, "Comma list of methods");
  bench->add_option("--sigma", sigma, "Comma list of pixel noise levels");
  bench->add_option("--trials", trials, "Trials per sigma");
  bench->add_option("--frames", frames, "Frames per window");
  bench->add_option("--windows", windows, "Sliding windows");
  bench->add_option("--pairing", pairing, "dense or first-anchor");
  bench->add_option("--camera", camera, "mono or stereo");
  bench->add_option("--shutter", shutter, "rs or gs-on-rs");
  bench->add_option("--trajectory", trajectory, "Trajectory kind");
  bench->add_option("--outliers", outliers, "Fraction of corrupted pairs");
  bench->add_flag("--ransac", ransac, "Prune outliers before solving");
  bench->add_option("--ransac-refit", ransac_refit,
                    "Consensus refit rounds after RANSAC (default 0)");
  bench->add_option("--seed", seed, "RNG seed");
  bench->add_option("--jobs", jobs, "Worker threads (0: all cores)");
  bench->add_option("--out", out, "Output directory")->required();

  std::string est_path, gt_path;
  auto* cmp = app.add_subcommand("compare", "Errors of estimates against ground truth");
  cmp->add_option("--estimate", est_path, "Estimate JSON")->required();
  cmp->add_option("--gt", gt_path, "Ground-truth JSON")->required();
  cmp->add_option("--out", out, "Metrics JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInputError;
  }

  try {
    if (*sim) {
      SimulateConfig c;
      c.trajectory.kind = parse_trajectory_kind(trajectory);
      c.scenario.seed = seed;
      c.scenario.frames = frames;
      c.window = window;
      c.out_dir = out;
      if (!sigma.empty()) c.scenario.sigma_px = parse_doubles(sigma).at(0);
      if (!pairing.empty()) c.scenario.pairing = io::parse_pairing(pairing);
      if (!camera.empty()) c.scenario.camera = io::parse_camera(camera);
      if (!accel_bias.empty()) c.scenario.accel_bias = parse_vec3(accel_bias);
      if (!gyro_bias.empty()) c.scenario.gyro_bias = parse_vec3(gyro_bias);
      return cmd_simulate(c, std::cout);
    }
    if (*solve) {
      SolveConfig c;
      c.imu_path = imu_path;
      c.tracks_path = tracks_path;
      c.calib_path = calib_path;
      if (!methods.empty()) c.methods = parse_methods(methods);
      if (!pairing.empty()) c.pairing = io::parse_pairing(pairing);
      if (!camera.empty()) c.camera = io::parse_camera(camera);
      c.shutter = io::parse_shutter(shutter);
      if (solve->count("--frames") > 0) c.frames = frames;
      c.model_accel_bias = model_accel;
      c.model_gyro_bias = model_gyro;
      c.ransac = !no_ransac;
      c.ransac_refit = ransac_refit;
      c.out_path = out;
      c.trace_path = trace_path;
      c.jacobian_path = jac_path;
      return cmd_solve(c, std::cout);
    }
    if (*bench) {
      BenchmarkConfig c;
      if (!preset.empty()) {
        c.preset = find_preset(preset);
      } else {
        c.preset.plot = "custom";
        c.preset.sigmas = kDefaultSigmas;
        c.preset.variants = {variant("custom", {Method::kLs, Method::kRenorm, Method::kBa})};
      }
      Preset& p = c.preset;
      if (bench->count("--trajectory") > 0) p.trajectory.kind = parse_trajectory_kind(trajectory);
      if (!sigma.empty()) p.sigmas = parse_doubles(sigma);
      if (bench->count("--trials") > 0 || preset.empty()) p.trials = trials;
      for (Variant& v : p.variants) {
        if (!methods.empty()) v.methods = parse_methods(methods);
        if (bench->count("--frames") > 0) v.scenario.frames = frames;
        if (!pairing.empty()) v.scenario.pairing = io::parse_pairing(pairing);
        if (!camera.empty()) v.scenario.camera = io::parse_camera(camera);
        if (bench->count("--shutter") > 0) v.scenario.shutter = io::parse_shutter(shutter);
        v.scenario.seed = seed;
      }
      c.jobs = jobs;
      c.windows = windows;
      c.outlier_fraction = outliers;
      c.ransac = ransac;
      c.ransac_refit = ransac_refit;
      c.out_dir = out;
      return cmd_benchmark(c, std::cout);
    }
    if (*cmp) {
      CompareConfig c;
      c.estimate_path = est_path;
      c.gt_path = gt_path;
      c.out_path = out;
      return cmd_compare(c, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace rsvio::cli
