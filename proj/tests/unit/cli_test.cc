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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "rsvio/error.h"

namespace rsvio::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("rsvio_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int call(std::vector<std::string> args) {
    std::vector<const char*> argv = {"rsvio"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
  }
  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }
  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  int simulate(const std::string& sub, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"simulate", "--out", path(sub)};
    args.insert(args.end(), extra.begin(), extra.end());
    return call(args);
  }
  int solve(const std::string& sub, std::vector<std::string> extra) {
    std::vector<std::string> args = {"solve",
                                     "--imu", path(sub + "/imu.csv"),
                                     "--tracks", path(sub + "/tracks.json"),
                                     "--calib", path(sub + "/calib.json")};
    args.insert(args.end(), extra.begin(), extra.end());
    return call(args);
  }

  fs::path dir_;
};

TEST(PresetTest, AllFigurePresetsExist) {
  const std::vector<std::string> names = preset_names();
  for (const char* n :
       {"paper-fig3", "paper-fig4", "paper-fig5", "paper-fig6", "paper-fig7"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
  }
  const Preset p3 = find_preset("paper-fig3");
  EXPECT_EQ(p3.sigmas.size(), 6u);
  EXPECT_EQ(p3.variants.at(0).methods.size(), 3u);
  EXPECT_EQ(find_preset("paper-fig4").variants.at(0).methods.size(), 4u);
  EXPECT_EQ(find_preset("paper-fig7").variants.size(), 2u);
  EXPECT_THROW(find_preset("paper-fig99"), Error);
}

TEST_F(CliTest, SimulateWritesFourFilesDeterministically) {
  ASSERT_EQ(simulate("a", {"--sigma", "0.3", "--seed", "5"}), kOk);
  ASSERT_EQ(simulate("b", {"--sigma", "0.3", "--seed", "5"}), kOk);
  for (const char* f : {"imu.csv", "tracks.json", "calib.json", "gt.json"}) {
    const std::string a = slurp(path(std::string("a/") + f));
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(path(std::string("b/") + f))) << f;
  }
  const auto tracks = nlohmann::json::parse(slurp(path("a/tracks.json")));
  EXPECT_EQ(tracks["tracks"].size(), 50u);
  for (const auto& t : tracks["tracks"]) {
    EXPECT_LE(t["observations"].size(), 10u);
  }
}

TEST_F(CliTest, NoiselessRoundTripRecoversTruth) {
  ASSERT_EQ(simulate("d"), kOk);
  ASSERT_EQ(solve("d", {"--method", "ls,renorm,ba", "--out", path("est.json")}),
            kOk);
  const auto est = nlohmann::json::parse(slurp(path("est.json")));
  ASSERT_TRUE(est.is_array());
  ASSERT_EQ(est.size(), 3u);
  EXPECT_EQ(est[2]["method"], "ba");
  ASSERT_EQ(call({"compare", "--estimate", path("est.json"), "--gt",
                  path("d/gt.json"), "--out", path("cmp.json")}),
            kOk);
  const auto cmp = nlohmann::json::parse(slurp(path("cmp.json")));
  for (const auto& m : cmp) {
    EXPECT_LT(m["eps_v"].get<double>(), 1e-6) << m["method"];
    EXPECT_LT(m["eps_g"].get<double>(), 1e-5) << m["method"];
  }
}

TEST_F(CliTest, SingleMethodWritesObject) {
  ASSERT_EQ(simulate("d", {"--sigma", "0.2"}), kOk);
  ASSERT_EQ(solve("d", {"--out", path("est.json"), "--trace", path("t.csv"),
                        "--dump-jacobians", path("j.csv")}),
            kOk);
  const auto est = nlohmann::json::parse(slurp(path("est.json")));
  ASSERT_TRUE(est.is_object());
  EXPECT_EQ(est["method"], "renorm");
  EXPECT_TRUE(est["converged"].get<bool>());
  EXPECT_EQ(est["cov"].size(), 36u);
  EXPECT_EQ(slurp(path("j.csv")).rfind("pair,s,param,column,value", 0), 0u);
}

TEST_F(CliTest, EmptyTracksExitWithInputError) {
  ASSERT_EQ(simulate("d"), kOk);
  std::ofstream(path("d/tracks.json")) << R"({"tracks": []})";
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(solve("d", {"--out", path("est.json")}), kInputError);
  EXPECT_NE(testing::internal::GetCapturedStderr().find(
                "need >= 6 correspondences"),
            std::string::npos);
}

TEST_F(CliTest, MalformedJsonReportsPosition) {
  ASSERT_EQ(simulate("d"), kOk);
  std::ofstream(path("d/calib.json")) << "{\n  \"fps\": 10,,\n}";
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(solve("d", {}), kInputError);
  EXPECT_NE(testing::internal::GetCapturedStderr().find("calib.json:2:"),
            std::string::npos);
}

TEST_F(CliTest, UnknownOptionsAndMethodsAreInputErrors) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(call({"solve", "--bogus"}), kInputError);
  ASSERT_EQ(simulate("d"), kOk);
  EXPECT_EQ(solve("d", {"--method", "fns"}), kInputError);
  EXPECT_EQ(call({"benchmark", "--preset", "nope", "--out", path("b")}),
            kInputError);
  ::testing::internal::GetCapturedStderr();
}

TEST_F(CliTest, BenchmarkSmokeRun) {
  ASSERT_EQ(call({"benchmark", "--trials", "2", "--sigma", "0.1", "--jobs", "1",
                  "--out", path("bench")}),
            kOk);
  const std::string agg = slurp(path("bench/aggregate.csv"));
  const std::string trials = slurp(path("bench/trials.csv"));
  EXPECT_EQ(std::count(agg.begin(), agg.end(), '\n'), 1 + 3);
  EXPECT_EQ(std::count(trials.begin(), trials.end(), '\n'), 1 + 2 * 3);
  EXPECT_TRUE(fs::exists(path("bench/plot_custom.csv")));
}

TEST_F(CliTest, PresetVariantsProduceSeparateFiles) {
  ASSERT_EQ(call({"benchmark", "--preset", "paper-fig6", "--trials", "1",
                  "--sigma", "0.2", "--method", "ls", "--out", path("f6")}),
            kOk);
  EXPECT_TRUE(fs::exists(path("f6/aggregate_stereo.csv")));
  EXPECT_TRUE(fs::exists(path("f6/aggregate_mono.csv")));
  EXPECT_TRUE(fs::exists(path("f6/plot_fig6.csv")));
}

}  // namespace
}  // namespace rsvio::cli
