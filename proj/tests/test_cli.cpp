/*
 * Copyright 2026 The lleb Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Drives the built `lleb` binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lleb/snapshot.hpp"

#ifndef LLEB_CLI_PATH
#error "LLEB_CLI_PATH must name the lleb executable"
#endif

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("lleb-cli-" + std::to_string(::getpid()) + "-" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) {
    const auto err_path = dir_ / "stderr.txt";
    const std::string cmd = std::string(LLEB_CLI_PATH) + " " + args + " 2>" + err_path.string();
    Result r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err_path);
    return r;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  fs::path synth(const std::string& name, const std::string& config_json) {
    const auto config = write(name + ".json", config_json);
    const auto out = dir_ / name;
    auto r = run("synth --config " + config.string() + " --out " + out.string());
    EXPECT_EQ(r.code, 0) << r.err;
    return out;
  }

  fs::path dir_;
};

constexpr const char* kSmall =
    R"({"weeks": 4, "initial_catalog": 60, "new_items_per_week": 10, "sessions_per_week": 150, "categories": 5, "seed": 3})";

TEST_F(Cli, StatsOnTinyFixture) {
  const auto clicks = write("clicks.csv",
                            "1,2014-04-07T10:51:09.277Z,214536502,0\n"
                            "1,2014-04-07T10:54:09.868Z,214536500,0\n"
                            "2,2014-04-15T13:56:37.614Z,214662742,0\n"
                            "2,2014-04-15T13:57:19.373Z,214536500,0\n");
  const auto buys = write("buys.csv", "2,2014-04-15T13:58:00.000Z,214662742,1046,1\n");
  auto r = run("stats --clicks " + clicks.string() + " --buys " + buys.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "week,new_items,sessions,positive_rate\n"
            "0,2,1,0.000000\n"
            "1,1,1,1.000000\n");
}

TEST_F(Cli, MissingInputIsAnInputError) {
  auto r = run("stats --clicks " + (dir_ / "nope.csv").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.csv"), std::string::npos);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(Cli, BadSynthConfigIsAnInputError) {
  const auto config = write("bad.json", R"({"weeks": 0, "colour": "red"})");
  auto r = run("synth --config " + config.string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST_F(Cli, SynthIsDeterministicAndStatsReadsItBack) {
  const auto a = synth("a", kSmall);
  const auto b = synth("b", kSmall);
  EXPECT_EQ(slurp(a / "clicks.csv"), slurp(b / "clicks.csv"));
  EXPECT_EQ(slurp(a / "buys.csv"), slurp(b / "buys.csv"));

  auto r = run("stats --clicks " + (a / "clicks.csv").string() + " --buys " + (a / "buys.csv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  std::vector<std::string> counts;
  while (std::getline(lines, line)) {
    auto first = line.find(',');
    auto second = line.find(',', first + 1);
    counts.push_back(line.substr(first + 1, second - first - 1));
    EXPECT_EQ(line.substr(second + 1, line.find(',', second + 1) - second - 1), "150");
  }
  EXPECT_EQ(counts, (std::vector<std::string>{"60", "10", "10", "10"}));
}

TEST_F(Cli, RunWritesResultsChartAndSnapshots) {
  const auto data = synth("data", kSmall);
  const auto out = dir_ / "out";
  const std::string args = "run --clicks " + (data / "clicks.csv").string() + " --buys " +
                           (data / "buys.csv").string() +
                           " --approaches baseline,unknown --num-seeds 2 --epochs 1 --dim 8 --snapshots --out ";
  auto r = run(args + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("baseline: "), std::string::npos);
  EXPECT_NE(r.out.find("unknown: "), std::string::npos);

  const auto csv = slurp(out / "results.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 3 * 2);
  EXPECT_TRUE(fs::exists(out / "results.json"));
  const auto svg = slurp(out / "chart.svg");
  EXPECT_NE(svg.find("data-approach=\"baseline\""), std::string::npos);
  EXPECT_NE(svg.find("data-approach=\"unknown\""), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "snapshots" / "unknown-seed0-week2.lleb"));

  auto again = run(args + (dir_ / "out2").string());
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(slurp(dir_ / "out2" / "results.csv"), csv);
  EXPECT_EQ(slurp(dir_ / "out2" / "chart.svg"), svg);
}

TEST_F(Cli, RunSingleApproachChartsOneSeries) {
  const auto data = synth("data", kSmall);
  const auto out = dir_ / "out";
  auto r = run("run --clicks " + (data / "clicks.csv").string() + " --buys " + (data / "buys.csv").string() +
               " --approaches unknown --num-seeds 1 --epochs 1 --dim 4 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto svg = slurp(out / "chart.svg");
  std::size_t polylines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
  EXPECT_EQ(polylines, 1u);
}

TEST_F(Cli, RunNeedsTwoWeeks) {
  const auto data = synth("data", R"({"weeks": 1, "initial_catalog": 20, "new_items_per_week": 0, "sessions_per_week": 50})");
  auto r = run("run --clicks " + (data / "clicks.csv").string() + " --buys " + (data / "buys.csv").string() +
               " --out " + (dir_ / "out").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("2 weekly segments"), std::string::npos);
}

TEST_F(Cli, RunRejectsUnknownApproach) {
  const auto data = synth("data", kSmall);
  auto r = run("run --clicks " + (data / "clicks.csv").string() + " --buys " + (data / "buys.csv").string() +
               " --approaches lstm --out " + (dir_ / "out").string());
  EXPECT_EQ(r.code, 2);
}

lleb::Snapshot sample_snapshot() {
  lleb::Snapshot s;
  std::vector<lleb::Token> tokens{"a", "b"};
  s.vocab = lleb::build_vocab(tokens);
  s.embedding = lleb::EmbeddingMatrix(3, 2, {0.0, 0.0, 3.0, 4.0, 1.0, 0.0});
  s.metadata = {"2014-04-07T00:00:00.000Z", "unknown", 1};
  return s;
}

TEST_F(Cli, SnapshotInspect) {
  const auto path = dir_ / "emb.lleb";
  lleb::save_snapshot(sample_snapshot(), path);
  auto r = run("snapshot inspect " + path.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("vocab_size=3 dim=2"), std::string::npos);
  EXPECT_NE(r.out.find("strategy=unknown"), std::string::npos);

  auto j = run("snapshot inspect --json " + path.string());
  ASSERT_EQ(j.code, 0) << j.err;
  auto parsed = nlohmann::json::parse(j.out);
  EXPECT_EQ(parsed["vocab_size"], 3);
  EXPECT_EQ(parsed["row_norms"]["max"], 5.0);
}

TEST_F(Cli, SnapshotInspectTruncated) {
  auto bytes = lleb::encode_snapshot(sample_snapshot());
  bytes.resize(bytes.size() - 8);
  std::ofstream(dir_ / "cut.lleb", std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  auto r = run("snapshot inspect " + (dir_ / "cut.lleb").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unexpected end of weights"), std::string::npos);
}

}  // namespace
