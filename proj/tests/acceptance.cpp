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

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "lleb/lleb.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace lleb;

namespace {

struct Outcome {
  enum Kind { Pass, Fail, Skip } kind = Pass;
  std::string detail;
};

Outcome pass(std::string d) { return {Outcome::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Fail, std::move(d)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("lleb-acceptance-" + std::to_string(::getpid()) + "-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 1 and 2 share the same case stream.
constexpr std::size_t kRemapCases = 1000;

Outcome remap_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng gen(20240601);
  std::size_t by_kind[4] = {};
  for (std::size_t i = 0; i < kRemapCases; ++i) {
    const auto kind = testing::kind_for(i);
    auto c = testing::random_remap_case(gen, kind);
    const std::uint64_t seed = gen.next_u64();
    Rng lib_rng(seed), oracle_rng(seed);
    auto got = remap(c.new_map, c.old_map, c.old_emb, c.strategy, lib_rng);
    auto want = testing::naive_remap(c.oracle, oracle_rng);
    if (!testing::bitwise_equal(got, want)) {
      return fail(fmt("case %zu (%s) differs from the naive transcription", i, strategy_name(c.strategy).c_str()));
    }
    ++by_kind[static_cast<int>(kind)];
  }
  const double elapsed = seconds_since(t0);
  auto detail = fmt("%zu cases (%zu extension, %zu reduction, %zu mixed, %zu permuted) bitwise equal in %.2fs",
                    kRemapCases, by_kind[0], by_kind[1], by_kind[2], by_kind[3], elapsed);
  return elapsed < 10.0 ? pass(detail) : fail(detail + ", limit 10s");
}

Outcome preservation() {
  Rng gen(20240601);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < kRemapCases; ++i) {
    auto c = testing::random_remap_case(gen, testing::kind_for(i));
    Rng rng(gen.next_u64());
    auto got = remap(c.new_map, c.old_map, c.old_emb, c.strategy, rng);
    for (const auto& token : c.new_map.tokens()) {
      auto old_id = c.old_map.find(token);
      if (!old_id) continue;
      auto a = got.row(c.new_map.lookup(token).value);
      auto b = c.old_emb.row(old_id->value);
      if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) {
        return fail(fmt("case %zu: row of '%s' changed", i, token.c_str()));
      }
      ++checked;
    }
  }
  return pass(fmt("%zu shared-token rows bitwise identical across %zu cases", checked, kRemapCases));
}

Outcome gradient_check() {
  constexpr std::size_t kConfigs = 120;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(777);
  double worst = 0.0;
  std::size_t partials = 0;
  for (auto agg : {Aggregator::MeanPool, Aggregator::ElmanRecurrent}) {
    for (std::size_t trial = 0; trial < kConfigs; ++trial) {
      const std::size_t dim = 1 + rng.below(6), rows = 2 + rng.below(8);
      auto p = make_params(new_random(rows, dim, rng.next_u64(), 0.5), agg);
      for (double& w : p.w_h) w = rng.uniform(-0.5, 0.5);
      for (double& w : p.w_x) w = rng.uniform(-0.5, 0.5);
      for (double& w : p.b_h) w = rng.uniform(-0.5, 0.5);
      for (double& w : p.w_out) w = rng.uniform(-0.5, 0.5);
      p.b_out = rng.uniform(-0.5, 0.5);
      std::vector<LabeledSequence> batch(1 + rng.below(4));
      for (auto& ex : batch) {
        for (std::size_t l = 1 + rng.below(7); l > 0; --l) {
          ex.ids.push_back(TokenId{static_cast<std::uint32_t>(rng.below(rows))});
        }
        ex.label = static_cast<int>(rng.below(2));
      }
      const double pos_weight = 1.0 + 4.0 * rng.uniform01();
      const auto analytic = testing::flatten(p, gradients(p, batch, pos_weight));
      const auto numeric = testing::central_differences(p, batch, pos_weight, 1e-5);
      for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double err = testing::relative_error(analytic[i], numeric[i]);
        worst = std::max(worst, err);
        ++partials;
        if (!(err < 1e-4)) {
          return fail(fmt("%s config %zu partial %zu: analytic %.10g vs numeric %.10g (rel %.3g)",
                          to_string(agg).c_str(), trial, i, analytic[i], numeric[i], err));
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  auto detail = fmt("%zu configs per aggregator, %zu partials, worst rel err %.2e, %.2fs", kConfigs,
                    partials, worst, elapsed);
  return elapsed < 30.0 ? pass(detail) : fail(detail + ", limit 30s");
}

Outcome auc_oracle() {
  Rng rng(4242);
  double worst = 0.0;
  std::size_t tied_sets = 0;
  for (int set = 0; set < 500; ++set) {
    const std::size_t n = 2 + rng.below(300);
    // a small score alphabet forces ties; some sets use continuous scores
    const std::size_t levels = rng.bernoulli(0.7) ? 1 + rng.below(10) : 0;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = levels ? static_cast<double>(rng.below(levels)) / 10.0 : rng.uniform01();
      labels[i] = rng.bernoulli(0.1 + 0.8 * rng.uniform01()) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    if (levels) ++tied_sets;
    const double got = auc(scores, labels);
    const double want = testing::brute_force_auc(scores, labels);
    const double err = std::abs(got - want);
    worst = std::max(worst, err);
    if (!(err <= 1e-12)) return fail(fmt("set %d: %.17g vs brute force %.17g", set, got, want));
  }
  return pass(fmt("500 sets (%zu with heavy ties), max |diff| %.1e", tied_sets, worst));
}

Snapshot random_snapshot(Rng& rng) {
  std::vector<Token> tokens;
  CategoryMap categories;
  const std::size_t n = rng.below(60);
  for (std::size_t i = 0; i < n; ++i) {
    Token t = "item-" + std::to_string(rng.below(1'000'000)) + (rng.bernoulli(0.1) ? "\xc3\xa9,\"x\"" : "");
    if (rng.bernoulli(0.5)) categories[t] = rng.bernoulli(0.2) ? "" : "cat" + std::to_string(rng.below(9));
    tokens.push_back(std::move(t));
  }
  Snapshot s;
  s.vocab = build_vocab(tokens, categories);
  const std::size_t dim = 1 + rng.below(16);
  std::vector<double> w(s.vocab.size() * dim);
  for (double& x : w) {
    switch (rng.below(4)) {
      case 0: x = rng.normal(); break;
      case 1: x = -0.0; break;
      case 2: x = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.below(2000)) - 1000); break;
      default: {
        std::uint64_t bits = rng.next_u64();
        std::memcpy(&x, &bits, sizeof x);
        if (!std::isfinite(x)) x = 1.0;
      }
    }
  }
  s.embedding = EmbeddingMatrix(s.vocab.size(), dim, std::move(w));
  s.metadata = {format_timestamp(static_cast<Millis>(rng.below(2'000'000'000'000ULL))),
                approach_name(kAllApproaches[rng.below(std::size(kAllApproaches))]),
                static_cast<std::int64_t>(rng.below(30))};
  return s;
}

Outcome snapshot_round_trip() {
  const auto dir = scratch_dir("snapshots");
  Rng rng(5150);
  std::string problem;
  for (int i = 0; i < 100 && problem.empty(); ++i) {
    const auto s = random_snapshot(rng);
    const auto path = dir / ("s" + std::to_string(i) + ".lleb");
    save_snapshot(s, path);
    const auto back = load_snapshot(path);
    const auto& a = s.embedding.data();
    const auto& b = back.embedding.data();
    if (!(back.vocab == s.vocab) || !(back.metadata == s.metadata) || back.embedding.dim() != s.embedding.dim() ||
        a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0 ||
        encode_snapshot(back) != encode_snapshot(s)) {
      problem = fmt("snapshot %d did not round-trip", i);
    }
  }

  const auto good = encode_snapshot(random_snapshot(rng));
  struct Fixture {
    const char* name;
    std::vector<std::uint8_t> bytes;
    const char* field;
    std::string message;
  };
  std::vector<Fixture> fixtures{{"bad-magic", good, "magic", "bad magic"},
                                {"bad-version", good, "version", "unsupported version 7"},
                                {"truncated", good, "weights", "unexpected end of weights"}};
  fixtures[0].bytes[0] = 'M';
  fixtures[1].bytes[4] = 7;
  fixtures[2].bytes.resize(good.size() - 3);
  for (const auto& f : fixtures) {
    if (!problem.empty()) break;
    const auto path = dir / (std::string(f.name) + ".lleb");
    std::ofstream(path, std::ios::binary)
        .write(reinterpret_cast<const char*>(f.bytes.data()), static_cast<std::streamsize>(f.bytes.size()));
    try {
      load_snapshot(path);
      problem = std::string(f.name) + " fixture loaded without error";
    } catch (const SnapshotError& e) {
      if (e.field() != f.field || e.what() != f.message) {
        problem = std::string(f.name) + " fixture gave " + e.field() + ": " + e.what();
      }
    }
  }
  fs::remove_all(dir);
  if (!problem.empty()) return fail(problem);
  return pass("100 random snapshots bitwise identical; bad magic, bad version, truncation each rejected distinctly");
}

Outcome generator_metric_consistency() {
  Rng rng(606);
  for (int i = 0; i < 20; ++i) {
    SyntheticConfig c;
    c.weeks = 1 + rng.below(8);
    c.sessions_per_week = 1 + rng.below(400);
    c.initial_catalog = 1 + rng.below(std::min<std::size_t>(300, c.sessions_per_week * kMaxSyntheticSessionLength));
    c.new_items_per_week = rng.below(std::min<std::size_t>(80, c.sessions_per_week * kMaxSyntheticSessionLength));
    c.mean_session_length = 1.0 + 7.0 * rng.uniform01();
    c.categories = 1 + rng.below(25);
    c.label_sharpness = 0.5 + 5.0 * rng.uniform01();
    c.seed = rng.next_u64();
    const auto data = synth_generate(c);
    const auto measured = new_items_per_week(data.segments);
    if (measured != data.new_item_schedule || data.segments.size() != c.weeks) {
      return fail(fmt("config %d (weeks %zu, catalog %zu, new %zu, sessions %zu) disagrees", i, c.weeks,
                      c.initial_catalog, c.new_items_per_week, c.sessions_per_week));
    }
  }
  return pass("20 random configs: ground-truth schedule equals measured new items per week");
}

SyntheticConfig trend_data_config() {
  SyntheticConfig c;
  c.weeks = 8;
  c.initial_catalog = 500;
  c.new_items_per_week = 50;
  c.sessions_per_week = 2000;
  c.seed = 0;
  return c;
}

ExperimentConfig trend_experiment_config() {
  ExperimentConfig c;
  c.approaches = {Approach::BaselineScratch, Approach::IncrementalRandom, Approach::IncrementalAverage,
                  Approach::IncrementalUnknown};
  c.seeds = {0, 1, 2, 3, 4};
  return c;
}

Outcome trend_replication() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = synth_generate(trend_data_config());
  const auto table = run_experiment(trend_experiment_config(), data.segments);
  std::vector<WeeklyAuc> window;
  for (const auto& r : table.rows) {
    if (r.week >= 1 && r.week <= 6) window.push_back(r);
  }
  const auto summary = aggregate(window);
  if (!summary.contains("baseline")) return fail("baseline produced no AUC in weeks 1..6");
  const double baseline = summary.at("baseline").mean;
  std::string detail = fmt("baseline %.4f", baseline);
  bool ok = true;
  for (const char* name : {"random", "average", "unknown"}) {
    if (!summary.contains(name)) return fail(std::string(name) + " produced no AUC in weeks 1..6");
    const auto& s = summary.at(name);
    detail += fmt(", %s %.4f (%+.4f)", name, s.mean, s.mean - baseline);
    if (!(s.mean >= baseline + 0.01) || !(s.mean >= 0.55)) ok = false;
  }
  detail += fmt("; %.1fs", seconds_since(t0));
  return ok ? pass(detail) : fail(detail + "; need >= baseline + 0.01 and >= 0.55");
}

Outcome determinism() {
  const auto data = synth_generate(trend_data_config());
  std::string csv[2], svg[2];
  for (int run = 0; run < 2; ++run) {
    auto config = trend_experiment_config();
    // different worker counts must not change a byte
    config.jobs = run == 0 ? 1 : 4;
    const auto dir = scratch_dir("determinism-" + std::to_string(run));
    const auto table = run_experiment(config, data.segments);
    export_results(table, dir / "results.csv", ExportFormat::Csv);
    render_chart(table, dir / "chart.svg");
    csv[run] = slurp(dir / "results.csv");
    svg[run] = slurp(dir / "chart.svg");
    fs::remove_all(dir);
  }
  if (csv[0] != csv[1]) return fail("results.csv differs between runs");
  if (svg[0] != svg[1]) return fail("chart.svg differs between runs");
  return pass(fmt("results.csv (%zu bytes) and chart.svg (%zu bytes) byte-identical", csv[0].size(), svg[0].size()));
}

Outcome real_data_smoke() {
  const char* root = std::getenv("LLEB_YOOCHOOSE_DIR");
  if (!root || !fs::exists(fs::path(root) / "yoochoose-clicks.dat")) {
    return {Outcome::Skip, "set LLEB_YOOCHOOSE_DIR to a directory holding yoochoose-clicks.dat"};
  }
  const fs::path dir = root;
  std::string cmd = std::string(LLEB_CLI_PATH) + " --quiet stats --clicks '" + (dir / "yoochoose-clicks.dat").string() + "'";
  if (fs::exists(dir / "yoochoose-buys.dat")) cmd += " --buys '" + (dir / "yoochoose-buys.dat").string() + "'";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return fail("could not start " + cmd);
  std::string out;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
  const int status = ::pclose(pipe);
  if (status != 0) return fail(fmt("stats exited with status %d", status));

  // week,new_items,sessions,positive_rate
  std::istringstream lines(out);
  std::string line, counts;
  std::vector<std::size_t> fresh;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    fresh.push_back(std::stoull(line.substr(a + 1, b - a - 1)));
    if (fresh.size() <= 6) counts += (fresh.size() > 1 ? " " : "") + line.substr(a + 1, b - a - 1);
  }
  const bool thousands = fresh.size() >= 3 && fresh[1] >= 1000 && fresh[2] >= 1000;
  auto detail = fmt("%zu weeks, new items in early weeks: %s", fresh.size(), counts.c_str());
  return thousands ? pass(detail) : fail(detail + "; expected thousands");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 remap oracle equivalence", remap_oracle},
      {"2 preservation invariant", preservation},
      {"3 gradient check", gradient_check},
      {"4 AUC oracle", auc_oracle},
      {"5 snapshot round-trip", snapshot_round_trip},
      {"6 generator/metric consistency", generator_metric_consistency},
      {"7 directional trend", trend_replication},
      {"8 determinism", determinism},
      {"9 full-data smoke", real_data_smoke},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.kind == Outcome::Pass ? "PASS" : o.kind == Outcome::Skip ? "SKIP" : "FAIL";
    std::printf("[%s] %s: %s\n", tag, name, o.detail.c_str());
    std::fflush(stdout);
    if (o.kind == Outcome::Fail) ++failures;
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
