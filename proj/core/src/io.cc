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

#include "rsvio/io.h"

#include <charconv>
#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "rsvio/error.h"

namespace rsvio::io {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& name, std::size_t line,
                       std::size_t column, const std::string& what) {
  throw Error(ErrorCode::kParse, name + ":" + std::to_string(line) + ":" +
                                     std::to_string(column) + ": " + what);
}

// Shortest representation that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Line and column (1-based) of a byte offset.
std::pair<std::size_t, std::size_t> locate(const std::string& text,
                                           std::size_t offset) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

/// Parses a JSON document, mapping syntax errors to line/column.
json parse_json(std::istream& in, const std::string& name) {
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    const auto [line, column] = locate(text, offset);
    std::string what = e.what();
    // Drop nlohmann's "[json.exception.parse_error.101] parse error at ..." prefix.
    if (const auto pos = what.find(": "); pos != std::string::npos) {
      what = what.substr(pos + 2);
    }
    fail(name, line, column, what);
  }
}

/// Schema errors carry the JSON path instead of a position in the text.
[[noreturn]] void schema_error(const std::string& name, const std::string& path,
                               const std::string& what) {
  throw Error(ErrorCode::kParse, name + ": " + path + ": " + what);
}

const json& field(const json& j, const char* key, const std::string& name,
                  const std::string& path) {
  if (!j.is_object()) schema_error(name, path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) schema_error(name, path, std::string("missing field '") + key + "'");
  return *it;
}

double number(const json& j, const std::string& name, const std::string& path) {
  if (!j.is_number()) schema_error(name, path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& name, const std::string& path) {
  if (!j.is_number_integer()) schema_error(name, path, "expected an integer");
  return j.get<int>();
}

Eigen::VectorXd vector(const json& j, Eigen::Index n, const std::string& name,
                       const std::string& path) {
  if (!j.is_array() || (n >= 0 && static_cast<Eigen::Index>(j.size()) != n)) {
    schema_error(name, path,
                 n >= 0 ? "expected an array of " + std::to_string(n) + " numbers"
                        : "expected an array of numbers");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    v(static_cast<Eigen::Index>(k)) =
        number(j[k], name, path + "/" + std::to_string(k));
  }
  return v;
}

Eigen::Matrix3d matrix3(const json& j, const std::string& name,
                        const std::string& path) {
  const Eigen::VectorXd v = vector(j, 9, name, path);
  Eigen::Matrix3d M;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) M(r, c) = v(3 * r + c);
  }
  return M;
}

json to_json(const Eigen::MatrixXd& M) {
  json a = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) a.push_back(M(r, c));
  }
  return a;
}

json to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json estimate_json(const InitEstimate& e) {
  json j;
  j["method"] = to_string(e.method);
  j["v0"] = to_json(e.v0);
  j["g0"] = to_json(e.g0);
  if (e.accel_bias) j["accel_bias"] = to_json(*e.accel_bias);
  if (e.gyro_bias) j["gyro_bias"] = to_json(*e.gyro_bias);
  if (e.has_covariance()) {
    j["cov"] = to_json(Eigen::MatrixXd(e.cov.topLeftCorner(6, 6)));
    if (e.cov.rows() > 6) j["cov_full"] = to_json(e.cov);
  } else {
    j["cov"] = json::array();
  }
  j["sigma_hat"] = e.sigma_hat;
  j["iterations"] = e.iterations;
  j["converged"] = e.converged;
  return j;
}

InitEstimate estimate_from_json(const json& j, const std::string& name,
                                const std::string& path) {
  InitEstimate e;
  const json& m = field(j, "method", name, path);
  if (!m.is_string()) schema_error(name, path + "/method", "expected a string");
  try {
    e.method = parse_method(m.get<std::string>());
  } catch (const Error& err) {
    schema_error(name, path + "/method", err.what());
  }
  e.v0 = vector(field(j, "v0", name, path), 3, name, path + "/v0");
  e.g0 = vector(field(j, "g0", name, path), 3, name, path + "/g0");
  if (j.contains("accel_bias")) {
    e.accel_bias = vector(j["accel_bias"], 3, name, path + "/accel_bias");
  }
  if (j.contains("gyro_bias")) {
    e.gyro_bias = vector(j["gyro_bias"], 3, name, path + "/gyro_bias");
  }
  const Eigen::VectorXd cov = vector(field(j, "cov", name, path), -1, name, path + "/cov");
  if (cov.size() == 36) {
    e.cov = Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>>(cov.data());
  } else if (cov.size() != 0) {
    schema_error(name, path + "/cov", "expected 36 numbers or an empty array");
  }
  e.sigma_hat = number(field(j, "sigma_hat", name, path), name, path + "/sigma_hat");
  e.iterations = integer(field(j, "iterations", name, path), name, path + "/iterations");
  const json& c = field(j, "converged", name, path);
  if (!c.is_boolean()) schema_error(name, path + "/converged", "expected a boolean");
  e.converged = c.get<bool>();
  return e;
}

}  // namespace

std::string to_string(PairPattern p) {
  return p == PairPattern::kDense ? "dense" : "first-anchor";
}
std::string to_string(CameraSetup c) {
  return c == CameraSetup::kStereo ? "stereo" : "mono";
}
std::string to_string(ShutterModel s) {
  return s == ShutterModel::kRolling ? "rs" : "gs-on-rs";
}

PairPattern parse_pairing(const std::string& s) {
  if (s == "dense") return PairPattern::kDense;
  if (s == "first-anchor") return PairPattern::kFirstAnchor;
  throw Error(ErrorCode::kInvalidArgument, "unknown pairing '" + s + "'");
}
CameraSetup parse_camera(const std::string& s) {
  if (s == "stereo") return CameraSetup::kStereo;
  if (s == "mono") return CameraSetup::kMono;
  throw Error(ErrorCode::kInvalidArgument, "unknown camera setup '" + s + "'");
}
ShutterModel parse_shutter(const std::string& s) {
  if (s == "rs") return ShutterModel::kRolling;
  if (s == "gs-on-rs") return ShutterModel::kGlobalOnRolling;
  throw Error(ErrorCode::kInvalidArgument, "unknown shutter model '" + s + "'");
}

ImuStream read_imu_csv(std::istream& in, const std::string& name) {
  static const char* kHeader = "t,wx,wy,wz,ax,ay,az";
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<double> times;
  ImuStream imu;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kHeader) {
        fail(name, line_no, 1, std::string("expected header '") + kHeader + "'");
      }
      header = true;
      continue;
    }
    double v[7];
    std::size_t pos = 0;
    for (int k = 0; k < 7; ++k) {
      const std::size_t end = line.find(',', pos);
      const bool last = k == 6;
      if ((end == std::string::npos) != last) {
        fail(name, line_no, pos + 1,
             last ? "too many fields, expected 7" : "too few fields, expected 7");
      }
      const std::string_view tok(line.data() + pos,
                                 (last ? line.size() : end) - pos);
      const char* first = tok.data();
      while (first < tok.data() + tok.size() && *first == ' ') ++first;
      const auto res = std::from_chars(first, tok.data() + tok.size(), v[k]);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        fail(name, line_no, pos + 1, "invalid number '" + std::string(tok) + "'");
      }
      pos = end + 1;
    }
    times.push_back(v[0]);
    ImuSample s;
    s.omega = Eigen::Vector3d(v[1], v[2], v[3]);
    s.accel = Eigen::Vector3d(v[4], v[5], v[6]);
    imu.samples.push_back(s);
  }
  if (!header) fail(name, line_no + 1, 1, "missing header");
  if (times.size() < 2) fail(name, line_no + 1, 1, "need at least two samples");
  imu.t0 = times.front();
  imu.dt = times[1] - times[0];
  if (!(imu.dt > 0.0)) fail(name, 3, 1, "timestamps must increase");
  for (std::size_t k = 2; k < times.size(); ++k) {
    const double expected = imu.t0 + imu.dt * static_cast<double>(k);
    if (std::abs(times[k] - expected) > 1e-6 * imu.dt + 1e-12) {
      fail(name, k + 2, 1, "timestamps must be uniformly spaced");
    }
  }
  return imu;
}

void write_imu_csv(std::ostream& out, const ImuStream& imu) {
  out << "t,wx,wy,wz,ax,ay,az\n";
  for (std::size_t k = 0; k < imu.samples.size(); ++k) {
    const ImuSample& s = imu.samples[k];
    out << fmt(imu.t0 + imu.dt * static_cast<double>(k));
    for (int i = 0; i < 3; ++i) out << ',' << fmt(s.omega(i));
    for (int i = 0; i < 3; ++i) out << ',' << fmt(s.accel(i));
    out << '\n';
  }
}

RigCalibration read_calibration(std::istream& in, const std::string& name) {
  const json j = parse_json(in, name);
  RigCalibration c;
  const json& cams = field(j, "cameras", name, "");
  if (!cams.is_array()) schema_error(name, "/cameras", "expected an array");
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const std::string path = "/cameras/" + std::to_string(k);
    CameraModel cam;
    cam.K = matrix3(field(cams[k], "K", name, path), name, path + "/K");
    cam.R_cam_imu = matrix3(field(cams[k], "R_cam_imu", name, path), name,
                            path + "/R_cam_imu");
    cam.t_cam_imu = vector(field(cams[k], "t_cam_imu", name, path), 3, name,
                           path + "/t_cam_imu");
    c.cameras.push_back(cam);
  }
  c.readout_per_line =
      number(field(j, "readout_per_line", name, ""), name, "/readout_per_line");
  c.image_height = integer(field(j, "image_height", name, ""), name, "/image_height");
  c.image_width = integer(field(j, "image_width", name, ""), name, "/image_width");
  c.fps = number(field(j, "fps", name, ""), name, "/fps");
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, name + ": " + e.what());
  }
  return c;
}

void write_calibration(std::ostream& out, const RigCalibration& calib) {
  json j;
  j["cameras"] = json::array();
  for (const CameraModel& cam : calib.cameras) {
    json c;
    c["K"] = to_json(Eigen::MatrixXd(cam.K));
    c["R_cam_imu"] = to_json(Eigen::MatrixXd(cam.R_cam_imu));
    c["t_cam_imu"] = to_json(cam.t_cam_imu);
    j["cameras"].push_back(c);
  }
  j["readout_per_line"] = calib.readout_per_line;
  j["image_height"] = calib.image_height;
  j["image_width"] = calib.image_width;
  j["fps"] = calib.fps;
  out << j.dump(2) << '\n';
}

TrackFile read_tracks(std::istream& in, const std::string& name) {
  const json j = parse_json(in, name);
  TrackFile f;
  try {
    if (j.is_object() && j.contains("pairing")) {
      f.pairing = parse_pairing(j["pairing"].get<std::string>());
    }
    if (j.is_object() && j.contains("camera")) {
      f.camera = parse_camera(j["camera"].get<std::string>());
    }
  } catch (const std::exception& e) {
    schema_error(name, "/", e.what());
  }
  if (j.is_object() && j.contains("frames")) {
    f.frames = integer(j["frames"], name, "/frames");
  }
  const json& tracks = field(j, "tracks", name, "");
  if (!tracks.is_array()) schema_error(name, "/tracks", "expected an array");
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    const std::string path = "/tracks/" + std::to_string(k);
    Track t;
    t.id = tracks[k].contains("id") ? integer(tracks[k]["id"], name, path + "/id")
                                    : static_cast<int>(k);
    const json& obs = field(tracks[k], "observations", name, path);
    if (!obs.is_array()) schema_error(name, path + "/observations", "expected an array");
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const std::string op = path + "/observations/" + std::to_string(i);
      Observation o;
      o.cam_id = integer(field(obs[i], "cam_id", name, op), name, op + "/cam_id");
      o.frame = integer(field(obs[i], "frame", name, op), name, op + "/frame");
      o.row = integer(field(obs[i], "row", name, op), name, op + "/row");
      const Eigen::VectorXd u = vector(field(obs[i], "u", name, op), 2, name, op + "/u");
      o.u = Eigen::Vector3d(u(0), u(1), 1.0);
      t.observations.push_back(o);
    }
    f.tracks.tracks.push_back(std::move(t));
  }
  return f;
}

void write_tracks(std::ostream& out, const TrackFile& tracks) {
  json j;
  if (tracks.pairing) j["pairing"] = to_string(*tracks.pairing);
  if (tracks.camera) j["camera"] = to_string(*tracks.camera);
  if (tracks.frames) j["frames"] = *tracks.frames;
  j["tracks"] = json::array();
  for (const Track& t : tracks.tracks.tracks) {
    json jt;
    jt["id"] = t.id;
    jt["observations"] = json::array();
    for (const Observation& o : t.observations) {
      jt["observations"].push_back({{"cam_id", o.cam_id},
                                    {"frame", o.frame},
                                    {"row", o.row},
                                    {"u", json::array({o.u.x() / o.u.z(),
                                                       o.u.y() / o.u.z()})}});
    }
    j["tracks"].push_back(std::move(jt));
  }
  out << j.dump(1) << '\n';
}

GroundTruth ground_truth(const Scenario& scenario) {
  GroundTruth gt;
  gt.v0 = scenario.v0;
  gt.g0 = scenario.g0;
  gt.window = scenario.window;
  gt.t_start = scenario.t_start;
  gt.points = scenario.points;
  return gt;
}

GroundTruth read_ground_truth(std::istream& in, const std::string& name) {
  const json j = parse_json(in, name);
  GroundTruth gt;
  gt.v0 = vector(field(j, "v0", name, ""), 3, name, "/v0");
  gt.g0 = vector(field(j, "g0", name, ""), 3, name, "/g0");
  if (j.contains("window")) gt.window = integer(j["window"], name, "/window");
  if (j.contains("t_start")) gt.t_start = number(j["t_start"], name, "/t_start");
  if (j.contains("points")) {
    const json& pts = j["points"];
    if (!pts.is_array()) schema_error(name, "/points", "expected an array");
    for (std::size_t k = 0; k < pts.size(); ++k) {
      gt.points.push_back(vector(pts[k], 3, name, "/points/" + std::to_string(k)));
    }
  }
  return gt;
}

void write_ground_truth(std::ostream& out, const GroundTruth& gt) {
  json j;
  j["v0"] = to_json(gt.v0);
  j["g0"] = to_json(gt.g0);
  j["window"] = gt.window;
  j["t_start"] = gt.t_start;
  j["points"] = json::array();
  for (const auto& p : gt.points) j["points"].push_back(to_json(p));
  out << j.dump(2) << '\n';
}

void write_estimates(std::ostream& out, const std::vector<InitEstimate>& est) {
  json j;
  if (est.size() == 1) {
    j = estimate_json(est.front());
  } else {
    j = json::array();
    for (const InitEstimate& e : est) j.push_back(estimate_json(e));
  }
  out << j.dump(2) << '\n';
}

std::vector<InitEstimate> read_estimates(std::istream& in, const std::string& name) {
  const json j = parse_json(in, name);
  std::vector<InitEstimate> out;
  if (j.is_array()) {
    for (std::size_t k = 0; k < j.size(); ++k) {
      out.push_back(estimate_from_json(j[k], name, "/" + std::to_string(k)));
    }
  } else {
    out.push_back(estimate_from_json(j, name, ""));
  }
  return out;
}

void write_trials_csv(std::ostream& out, const std::vector<TrialResult>& trials) {
  out << "sigma,window,trial,method,eps_v,eps_g,iters,sigma_hat,pred_std_v,"
         "pred_std_g\n";
  for (const TrialResult& t : trials) {
    out << fmt(t.sigma) << ',' << t.window << ',' << t.trial << ','
        << to_string(t.method) << ',';
    if (t.ok) {
      out << fmt(t.eps_v) << ',' << fmt(t.eps_g) << ',' << t.iterations << ','
          << fmt(t.sigma_hat) << ',' << fmt(t.pred_std_v) << ','
          << fmt(t.pred_std_g) << '\n';
    } else {
      out << "nan,nan,0,nan,nan,nan\n";
    }
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<Aggregate>& agg) {
  out << "sigma,method,count,failures,mean_eps_v,std_eps_v,median_eps_v,"
         "mean_eps_g,std_eps_g,median_eps_g,mean_iters,median_iters,"
         "median_sigma_hat,mean_pred_std_v,mean_pred_std_g\n";
  for (const Aggregate& a : agg) {
    out << fmt(a.sigma) << ',' << to_string(a.method) << ',' << a.count << ','
        << a.failures << ',' << fmt(a.mean_eps_v) << ',' << fmt(a.std_eps_v)
        << ',' << fmt(a.median_eps_v) << ',' << fmt(a.mean_eps_g) << ','
        << fmt(a.std_eps_g) << ',' << fmt(a.median_eps_g) << ','
        << fmt(a.mean_iterations) << ',' << fmt(a.median_iterations) << ','
        << fmt(a.median_sigma_hat) << ',' << fmt(a.mean_pred_std_v) << ','
        << fmt(a.mean_pred_std_g) << '\n';
  }
}

void write_trace_csv(std::ostream& out, const std::vector<BaTraceEntry>& trace) {
  out << "iteration,cost,damping,accepted\n";
  for (const BaTraceEntry& e : trace) {
    out << e.iteration << ',' << fmt(e.cost) << ',' << fmt(e.damping) << ','
        << (e.accepted ? 1 : 0) << '\n';
  }
}

void write_jacobian_csv(std::ostream& out, const RowCovariances& covs) {
  out << "pair,s,param,column,value\n";
  for (std::size_t a = 0; a < covs.pairs.size(); ++a) {
    for (int s = 0; s < 3; ++s) {
      const Eigen::MatrixXd& J = covs.pairs[a].J[static_cast<std::size_t>(s)];
      for (Eigen::Index r = 0; r < J.rows(); ++r) {
        for (Eigen::Index c = 0; c < J.cols(); ++c) {
          out << a << ',' << s << ',' << r << ',' << c << ',' << fmt(J(r, c)) << '\n';
        }
      }
    }
  }
}

}  // namespace rsvio::io
