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

// lleb: command-line front end for the lifelong-embedding toolkit.
//
// Exit codes: 0 success, 2 input/config error, 3 experiment error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lleb/lleb.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitExperiment = 3;

// stdout is reserved for results; everything else goes through here.
struct Logger {
  bool quiet = false;
  bool json = false;

  void emit(const char* level, const std::string& message) const {
    if (quiet && std::string_view(level) != "error") return;
    if (json) {
      std::cerr << nlohmann::json{{"level", level}, {"msg", message}}.dump() << '\n';
    } else {
      std::cerr << "lleb: " << level << ": " << message << '\n';
    }
  }
  void info(const std::string& m) const { emit("info", m); }
  void warn(const std::string& m) const { emit("warn", m); }
  void error(const std::string& m) const { emit("error", m); }
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void report_log(const Logger& log, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) log.warn(w);
}

std::vector<lleb::Session> load_sessions(const Logger& log, const fs::path& clicks_path,
                                         const std::optional<fs::path>& buys_path) {
  auto clicks = lleb::load_clicks(clicks_path);
  report_log(log, clicks.warnings);
  lleb::BuyLog buys;
  if (buys_path) {
    buys = lleb::load_buys(*buys_path);
    report_log(log, buys.warnings);
  }
  auto assembled = lleb::assemble_sessions(clicks.events, buys.sessions);
  report_log(log, assembled.warnings);
  return std::move(assembled.sessions);
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string clicks;
  std::string buys;
};

int cmd_stats(const StatsArgs& args, const Logger& log) {
  std::optional<fs::path> buys;
  if (!args.buys.empty()) buys = args.buys;
  const auto sessions = load_sessions(log, args.clicks, buys);
  std::cout << "week,new_items,sessions,positive_rate\n";
  if (sessions.empty()) return kExitOk;
  const auto segments = lleb::partition_weeks(sessions);
  const auto fresh = lleb::new_items_per_week(segments);
  for (const auto& seg : segments) {
    std::size_t positives = 0;
    for (const auto& s : seg.sessions) positives += s.label;
    const double rate = seg.sessions.empty()
                            ? 0.0
                            : static_cast<double>(positives) / static_cast<double>(seg.sessions.size());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", rate);
    std::cout << seg.index << ',' << fresh[seg.index] << ',' << seg.sessions.size() << ',' << buf << '\n';
  }
  if (segments.back().partial) log.info("last week is partial");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config;
  std::string out;
};

int cmd_synth(const SynthArgs& args, std::optional<std::uint64_t> seed, const Logger& log) {
  lleb::SyntheticConfig config;
  try {
    config = lleb::synthetic_config_from_json(read_json_file(args.config));
    if (seed) config.seed = *seed;
  } catch (const lleb::InvalidInput& e) {
    throw InputError(args.config + ": " + e.what());
  }
  const auto data = lleb::synth_generate(config);
  const fs::path out = args.out;
  ensure_directory(out);
  {
    std::ofstream clicks(out / "clicks.csv", std::ios::binary | std::ios::trunc);
    if (!clicks) throw InputError("cannot write " + (out / "clicks.csv").string());
    lleb::write_clicks(clicks, data.segments);
  }
  {
    std::ofstream buys(out / "buys.csv", std::ios::binary | std::ios::trunc);
    if (!buys) throw InputError("cannot write " + (out / "buys.csv").string());
    lleb::write_buys(buys, data.segments);
  }
  std::size_t sessions = 0;
  for (const auto& seg : data.segments) sessions += seg.sessions.size();
  log.info("wrote " + std::to_string(data.segments.size()) + " weeks, " + std::to_string(sessions) +
           " sessions to " + out.string());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string clicks;
  std::string buys;
  std::string config;
  std::string out;
  bool snapshots = false;
  std::vector<std::string> approaches;
  std::optional<std::size_t> num_seeds;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> dim;
  bool carry_head = false;
  bool baseline_global_vocab = false;
};

lleb::ExperimentConfig resolve_experiment_config(const RunArgs& args, std::optional<std::uint64_t> seed,
                                                 std::optional<std::size_t> jobs) {
  lleb::ExperimentConfig config;
  try {
    nlohmann::json j = args.config.empty() ? nlohmann::json::object() : read_json_file(args.config);
    config = lleb::experiment_config_from_json(j);
    if (!args.approaches.empty()) {
      config.approaches.clear();
      for (const auto& name : args.approaches) {
        auto a = lleb::parse_approach(name);
        if (!a) throw lleb::InvalidInput("unknown approach '" + name + "'");
        if (std::find(config.approaches.begin(), config.approaches.end(), *a) == config.approaches.end()) {
          config.approaches.push_back(*a);
        }
      }
    }
    if (args.num_seeds || seed) {
      const std::size_t n = args.num_seeds.value_or(config.seeds.size());
      const std::uint64_t base = seed.value_or(config.seeds.front());
      config.seeds.resize(n);
      for (std::size_t i = 0; i < n; ++i) config.seeds[i] = base + i;
    }
    if (args.epochs) config.train.epochs_per_segment = *args.epochs;
    if (args.dim) config.dim = *args.dim;
    if (args.carry_head) config.carry_head = true;
    if (args.baseline_global_vocab) config.baseline_global_vocab = true;
    if (jobs) config.jobs = *jobs;
    config.validate();
  } catch (const lleb::InvalidInput& e) {
    throw InputError(e.what());
  }
  return config;
}

int cmd_run(const RunArgs& args, std::optional<std::uint64_t> seed, std::optional<std::size_t> jobs,
            const Logger& log) {
  const auto config = resolve_experiment_config(args, seed, jobs);
  const auto sessions = load_sessions(log, args.clicks, fs::path(args.buys));
  if (sessions.empty()) {
    log.error("no sessions in " + args.clicks);
    return kExitExperiment;
  }
  const auto segments = lleb::partition_weeks(sessions);
  if (segments.size() < 2) {
    log.error("experiment needs at least 2 weekly segments, data spans " +
              std::to_string(segments.size()));
    return kExitExperiment;
  }
  const fs::path out = args.out;
  ensure_directory(out);

  lleb::RunOptions options;
  if (args.snapshots) {
    ensure_directory(out / "snapshots");
    options.observer = [&](const lleb::WeekObservation& obs) {
      if (obs.stage != lleb::Stage::AfterTraining) return;
      lleb::Snapshot snap;
      snap.vocab = obs.vocab;
      snap.embedding = obs.params.emb;
      snap.metadata.created_at = lleb::format_timestamp(segments[obs.week].end);
      snap.metadata.strategy = lleb::approach_name(obs.approach);
      snap.metadata.week = static_cast<std::int64_t>(obs.week);
      const auto name = lleb::approach_name(obs.approach) + "-seed" + std::to_string(obs.seed) +
                        "-week" + std::to_string(obs.week) + ".lleb";
      lleb::save_snapshot(snap, out / "snapshots" / name);
    };
  }

  lleb::ResultTable table;
  try {
    log.info("running " + std::to_string(config.approaches.size()) + " approach(es) x " +
             std::to_string(config.seeds.size()) + " seed(s) over " + std::to_string(segments.size()) +
             " weeks");
    table = lleb::run_experiment(config, segments, std::move(options));
  } catch (const std::exception& e) {
    log.error(std::string("experiment failed: ") + e.what());
    return kExitExperiment;
  }
  for (const auto& s : table.skipped) {
    log.warn(s.approach + " seed " + std::to_string(s.seed) + " week " + std::to_string(s.week) +
             " skipped: " + s.reason);
  }
  lleb::export_results(table, out / "results.csv", lleb::ExportFormat::Csv);
  lleb::export_results(table, out / "results.json", lleb::ExportFormat::Json);
  if (table.rows.empty()) {
    log.warn("no week produced a defined AUC; chart not written");
    return kExitOk;
  }
  lleb::render_chart(table, out / "chart.svg");

  auto summary = lleb::aggregate(table.rows);
  std::vector<std::pair<std::string, lleb::ApproachSummary>> ordered(summary.begin(), summary.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    return lleb::approach_rank(a.first) < lleb::approach_rank(b.first);
  });
  for (const auto& [name, s] : ordered) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f ± %.3f", s.mean, s.stddev);
    std::cout << name << ": " << buf << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SnapshotArgs {
  std::string path;
  bool json = false;
};

int cmd_snapshot_inspect(const SnapshotArgs& args) {
  lleb::Snapshot snap;
  try {
    snap = lleb::load_snapshot(args.path);
  } catch (const lleb::SnapshotError& e) {
    throw InputError(args.path + ": " + e.field() + ": " + e.what());
  } catch (const lleb::InvalidInput& e) {
    throw InputError(e.what());
  }
  const auto& emb = snap.embedding;
  std::vector<double> norms(emb.rows());
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    double ss = 0.0;
    for (double w : emb.row(i)) ss += w * w;
    norms[i] = std::sqrt(ss);
  }
  const double min = *std::min_element(norms.begin(), norms.end());
  const double max = *std::max_element(norms.begin(), norms.end());
  const double mean = lleb::mean_of(norms);
  const std::size_t categorized = snap.vocab.categories().size();

  if (args.json) {
    nlohmann::json j = {
        {"version", snap.version},
        {"vocab_size", snap.vocab.size()},
        {"dim", emb.dim()},
        {"categorized_tokens", categorized},
        {"metadata",
         {{"created_at", snap.metadata.created_at},
          {"strategy", snap.metadata.strategy},
          {"week", snap.metadata.week}}},
        {"row_norms", {{"min", min}, {"mean", mean}, {"max", max}, {"unknown", norms[0]}}},
    };
    std::cout << j.dump(2) << '\n';
    return kExitOk;
  }
  char buf[160];
  std::cout << "version=" << snap.version << '\n';
  std::cout << "vocab_size=" << snap.vocab.size() << " dim=" << emb.dim() << '\n';
  std::cout << "categorized_tokens=" << categorized << '\n';
  std::cout << "created_at=" << snap.metadata.created_at << " strategy=" << snap.metadata.strategy
            << " week=" << snap.metadata.week << '\n';
  std::snprintf(buf, sizeof buf, "row_norm min=%.6g mean=%.6g max=%.6g unknown=%.6g", min, mean, max,
                norms[0]);
  std::cout << buf << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic embedding vocabularies: stats, synthetic data, weekly incremental experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  Logger log;
  app.add_option("--seed", seed, "Base seed (synth: generator seed; run: first of consecutive run seeds)");
  app.add_flag("--quiet", log.quiet, "Only report errors on stderr");
  app.add_flag("--json-logs", log.json, "Emit diagnostics as JSON lines on stderr");
  app.add_option("--jobs", jobs, "Maximum concurrent runs (default: available processors)")
      ->check(CLI::PositiveNumber);

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Weekly new-item counts and session summary (CSV)");
  stats_cmd->add_option("--clicks", stats.clicks, "Clicks CSV")->required();
  stats_cmd->add_option("--buys", stats.buys, "Buys CSV");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic clicks.csv / buys.csv pair");
  synth_cmd->add_option("--config", synth.config, "Synthetic config JSON")->required();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Weekly train/evaluate experiment");
  run_cmd->add_option("--clicks", run.clicks, "Clicks CSV")->required();
  run_cmd->add_option("--buys", run.buys, "Buys CSV")->required();
  run_cmd->add_option("--config", run.config, "Experiment config JSON");
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_flag("--snapshots", run.snapshots, "Save the embedding after every training week");
  run_cmd->add_option("--approaches", run.approaches, "Comma-separated approaches")->delimiter(',');
  run_cmd->add_option("--num-seeds", run.num_seeds, "Number of runs per approach")->check(CLI::PositiveNumber);
  run_cmd->add_option("--epochs", run.epochs, "Epochs per training week");
  run_cmd->add_option("--dim", run.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--carry-head", run.carry_head, "Carry aggregator/output weights across weeks");
  run_cmd->add_flag("--baseline-global-vocab", run.baseline_global_vocab,
                    "Baseline keeps a cumulative vocabulary (fresh weights each week)");

  SnapshotArgs snapshot;
  auto* snapshot_cmd = app.add_subcommand("snapshot", "Embedding snapshot tools");
  snapshot_cmd->require_subcommand(1);
  auto* inspect_cmd = snapshot_cmd->add_subcommand("inspect", "Summarize a snapshot file");
  inspect_cmd->add_option("path", snapshot.path, "Snapshot file")->required();
  inspect_cmd->add_flag("--json", snapshot.json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*stats_cmd) return cmd_stats(stats, log);
    if (*synth_cmd) return cmd_synth(synth, seed, log);
    if (*run_cmd) return cmd_run(run, seed, jobs, log);
    if (*inspect_cmd) return cmd_snapshot_inspect(snapshot);
  } catch (const InputError& e) {
    log.error(e.what());
    return kExitInput;
  } catch (const lleb::ParseError& e) {
    log.error(e.what());
    return kExitInput;
  } catch (const lleb::InvalidInput& e) {
    log.error(e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    log.error(e.what());
    return kExitExperiment;
  }
  return kExitInput;
}
