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

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "lleb/embedding.hpp"
#include "lleb/error.hpp"
#include "lleb/metrics.hpp"
#include "lleb/model.hpp"
#include "lleb/random.hpp"
#include "lleb/session.hpp"
#include "lleb/vocab.hpp"

namespace lleb {

enum class Approach {
  BaselineScratch,
  IncrementalRandom,
  IncrementalAverage,
  IncrementalUnknown,
  IncrementalCategory,
  IncrementalSimilar,
};

inline constexpr Approach kAllApproaches[] = {
    Approach::BaselineScratch,    Approach::IncrementalRandom,   Approach::IncrementalAverage,
    Approach::IncrementalUnknown, Approach::IncrementalCategory, Approach::IncrementalSimilar};

inline std::string approach_name(Approach a) {
  switch (a) {
    case Approach::BaselineScratch: return "baseline";
    case Approach::IncrementalRandom: return "random";
    case Approach::IncrementalAverage: return "average";
    case Approach::IncrementalUnknown: return "unknown";
    case Approach::IncrementalCategory: return "category";
    case Approach::IncrementalSimilar: return "similar";
  }
  throw Defect("unhandled approach");
}

inline std::optional<Approach> parse_approach(std::string_view name) {
  for (auto a : kAllApproaches) {
    if (approach_name(a) == name) return a;
  }
  return std::nullopt;
}

// Position in kAllApproaches; unknown names sort last.
inline std::size_t approach_rank(std::string_view name) {
  auto a = parse_approach(name);
  return a ? static_cast<std::size_t>(*a) : std::size(kAllApproaches);
}

struct VocabPolicy {
  enum class Mode { Cumulative, SlidingWindow };
  Mode mode = Mode::Cumulative;
  std::size_t horizon = 4;  // weeks of history kept under SlidingWindow
};

struct ExperimentConfig {
  std::vector<Approach> approaches = {Approach::BaselineScratch, Approach::IncrementalRandom,
                                      Approach::IncrementalAverage, Approach::IncrementalUnknown};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  TrainConfig train;
  Aggregator aggregator = Aggregator::MeanPool;
  std::size_t dim = 32;
  // Uniform half-width for fresh embeddings and for the random strategy.
  double init_scale = 0.05;
  VocabPolicy vocab_policy;
  bool carry_head = false;
  bool baseline_global_vocab = false;
  // Concurrent (approach, seed) runs; 0 means one per hardware thread.
  std::size_t jobs = 0;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (approaches.empty()) out.push_back("approaches must not be empty");
    if (seeds.empty()) out.push_back("seeds must not be empty");
    if (dim < 1) out.push_back("dim must be >= 1");
    if (!(init_scale > 0.0)) out.push_back("init_scale must be positive");
    if (vocab_policy.mode == VocabPolicy::Mode::SlidingWindow && vocab_policy.horizon < 1) {
      out.push_back("prune_horizon must be >= 1");
    }
    try {
      train.validate();
    } catch (const InvalidInput& e) {
      out.push_back(e.what());
    }
    return out;
  }

  void validate() const {
    auto p = problems();
    if (p.empty()) return;
    std::string message = "invalid experiment config:";
    for (const auto& s : p) message += " " + s + ";";
    throw InvalidInput(message);
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json approaches = nlohmann::json::array();
  for (auto a : c.approaches) approaches.push_back(approach_name(a));
  return {
      {"approaches", approaches},
      {"seeds", c.seeds},
      {"dim", c.dim},
      {"aggregator", to_string(c.aggregator)},
      {"init_scale", c.init_scale},
      {"vocab_policy", c.vocab_policy.mode == VocabPolicy::Mode::Cumulative ? "cumulative" : "sliding"},
      {"prune_horizon", c.vocab_policy.horizon},
      {"carry_head", c.carry_head},
      {"baseline_global_vocab", c.baseline_global_vocab},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"adam_beta1", c.train.adam_beta1},
        {"adam_beta2", c.train.adam_beta2},
        {"adam_eps", c.train.adam_eps},
        {"epochs_per_segment", c.train.epochs_per_segment},
        {"minibatch_size", c.train.minibatch_size},
        {"max_sequence_length", c.train.max_sequence_length}}},
  };
}

// Missing keys keep their defaults. All problems are collected into a single
// InvalidInput.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInput("experiment config must be a JSON object");
  ExperimentConfig c;
  std::vector<std::string> problems;

  auto count = [&](const nlohmann::json& obj, const char* key, std::size_t& field) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      problems.push_back(std::string(key) + " must be a non-negative integer");
    } else {
      field = v.get<std::size_t>();
    }
  };
  auto real = [&](const nlohmann::json& obj, const char* key, double& field) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_number()) {
      problems.push_back(std::string(key) + " must be a number");
    } else {
      field = obj.at(key).get<double>();
    }
  };
  auto flag = [&](const char* key, bool& field) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) {
      problems.push_back(std::string(key) + " must be a boolean");
    } else {
      field = j.at(key).get<bool>();
    }
  };
  auto check_keys = [&](const nlohmann::json& obj, std::initializer_list<const char*> known,
                        const std::string& prefix) {
    for (const auto& [key, value] : obj.items()) {
      if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
        problems.push_back("unknown field '" + prefix + key + "'");
      }
    }
  };

  check_keys(j,
             {"approaches", "seeds", "num_seeds", "dim", "aggregator", "init_scale", "vocab_policy",
              "prune_horizon", "carry_head", "baseline_global_vocab", "train", "jobs"},
             "");

  if (j.contains("approaches")) {
    const auto& v = j.at("approaches");
    if (!v.is_array()) {
      problems.push_back("approaches must be an array of names");
    } else {
      c.approaches.clear();
      for (const auto& name : v) {
        auto a = name.is_string() ? parse_approach(name.get<std::string>()) : std::nullopt;
        if (!a) {
          problems.push_back("unknown approach " + name.dump());
        } else if (std::find(c.approaches.begin(), c.approaches.end(), *a) == c.approaches.end()) {
          c.approaches.push_back(*a);
        }
      }
    }
  }
  if (j.contains("seeds") && j.contains("num_seeds")) {
    problems.push_back("give either seeds or num_seeds, not both");
  } else if (j.contains("seeds")) {
    const auto& v = j.at("seeds");
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const auto& s) {
          return s.is_number_unsigned() || (s.is_number_integer() && s.template get<std::int64_t>() >= 0);
        })) {
      problems.push_back("seeds must be an array of non-negative integers");
    } else {
      c.seeds = v.get<std::vector<std::uint64_t>>();
    }
  } else if (j.contains("num_seeds")) {
    std::size_t n = 0;
    count(j, "num_seeds", n);
    c.seeds.resize(n);
    for (std::size_t i = 0; i < n; ++i) c.seeds[i] = i;
  }
  count(j, "dim", c.dim);
  count(j, "jobs", c.jobs);
  real(j, "init_scale", c.init_scale);
  if (j.contains("aggregator")) {
    const auto& v = j.at("aggregator");
    if (v == "mean") c.aggregator = Aggregator::MeanPool;
    else if (v == "elman") c.aggregator = Aggregator::ElmanRecurrent;
    else problems.push_back("aggregator must be \"mean\" or \"elman\"");
  }
  if (j.contains("vocab_policy")) {
    const auto& v = j.at("vocab_policy");
    if (v == "cumulative") c.vocab_policy.mode = VocabPolicy::Mode::Cumulative;
    else if (v == "sliding") c.vocab_policy.mode = VocabPolicy::Mode::SlidingWindow;
    else problems.push_back("vocab_policy must be \"cumulative\" or \"sliding\"");
  }
  count(j, "prune_horizon", c.vocab_policy.horizon);
  flag("carry_head", c.carry_head);
  flag("baseline_global_vocab", c.baseline_global_vocab);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (!t.is_object()) {
      problems.push_back("train must be an object");
    } else {
      check_keys(t,
                 {"learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "epochs_per_segment",
                  "minibatch_size", "max_sequence_length"},
                 "train.");
      real(t, "learning_rate", c.train.learning_rate);
      real(t, "adam_beta1", c.train.adam_beta1);
      real(t, "adam_beta2", c.train.adam_beta2);
      real(t, "adam_eps", c.train.adam_eps);
      count(t, "epochs_per_segment", c.train.epochs_per_segment);
      count(t, "minibatch_size", c.train.minibatch_size);
      count(t, "max_sequence_length", c.train.max_sequence_length);
    }
  }
  if (problems.empty()) problems = c.problems();
  if (!problems.empty()) {
    std::string message = "invalid experiment config:";
    for (const auto& p : problems) message += " " + p + ";";
    throw InvalidInput(message);
  }
  return c;
}

// Builds a similarity ranking for the new tokens of a training week, given the
// vocabulary they are being added to.
using SimilarityProvider =
    std::function<SimilarityRanking(const WeekSegment& week, const VocabMap& old_map)>;

// Ranks old tokens by the number of the week's sessions they share with the
// new token (ties broken by token). Only old tokens are candidates.
inline SimilarityRanking co_occurrence_similarity(const WeekSegment& week, const VocabMap& old_map) {
  auto table = std::make_shared<std::unordered_map<Token, std::vector<ScoredToken>>>();
  std::unordered_map<Token, std::map<Token, double>> counts;
  for (const auto& session : week.sessions) {
    std::vector<Token> fresh, known;
    std::unordered_set<Token> seen;
    for (const auto& item : session.items) {
      if (!seen.insert(item.token).second) continue;
      (old_map.contains(item.token) ? known : fresh).push_back(item.token);
    }
    for (const auto& f : fresh) {
      auto& row = counts[f];
      for (const auto& k : known) row[k] += 1.0;
    }
  }
  for (auto& [token, row] : counts) {
    std::vector<ScoredToken> ranked;
    for (auto& [other, score] : row) ranked.push_back({other, score});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const ScoredToken& a, const ScoredToken& b) { return a.score > b.score; });
    table->emplace(token, std::move(ranked));
  }
  return [table](const Token& token) -> std::vector<ScoredToken> {
    auto it = table->find(token);
    return it == table->end() ? std::vector<ScoredToken>{} : it->second;
  };
}

struct SkippedWeek {
  std::string approach;
  std::size_t week = 0;
  std::uint64_t seed = 0;
  std::string reason;

  friend bool operator==(const SkippedWeek&, const SkippedWeek&) = default;
};

struct RunMetadata {
  nlohmann::json config;
  std::string data_fingerprint;
  double wall_clock_seconds = 0.0;
};

inline constexpr const char* kStdConvention = "sample standard deviation (n-1) over per-week seed means";

// One row per (approach, training week, seed) whose evaluation week produced a
// defined AUC. `week` is the training week t; evaluation used week t+1.
struct ResultTable {
  std::vector<WeeklyAuc> rows;
  std::vector<SkippedWeek> skipped;
  RunMetadata metadata;
};

enum class Stage { BeforeTraining, AfterTraining };

struct WeekObservation {
  Approach approach;
  std::uint64_t seed;
  std::size_t week;
  Stage stage;
  const VocabMap& vocab;
  const ClassifierParams& params;
};

// Called from worker threads; must be safe to invoke concurrently.
using WeekObserver = std::function<void(const WeekObservation&)>;

inline std::string data_fingerprint(std::span<const WeekSegment> segments) {
  std::uint64_t h = fnv1a64("lleb-data-v1");
  auto feed = [&h](std::string_view s) {
    h = fnv1a64(s, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
  };
  for (const auto& seg : segments) {
    feed(std::to_string(seg.index));
    for (const auto& s : seg.sessions) {
      feed(s.id);
      feed(std::to_string(s.label));
      for (const auto& item : s.items) {
        feed(item.token);
        feed(std::to_string(item.timestamp));
        feed(item.category.value_or(""));
      }
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct RunOptions {
  WeekObserver observer;
  // Required by IncrementalSimilar; defaults to co_occurrence_similarity.
  SimilarityProvider similarity;
};

namespace detail {

inline std::string week_label(const char* purpose, std::size_t week) {
  return std::string(purpose) + "/week-" + std::to_string(week);
}

inline InitStrategy strategy_for(Approach a, const ExperimentConfig& config,
                                 const WeekSegment& week, const VocabMap& old_map,
                                 const SimilarityProvider& similarity) {
  switch (a) {
    case Approach::IncrementalRandom: return init::Random{config.init_scale};
    case Approach::IncrementalAverage: return init::GlobalAverage{};
    case Approach::IncrementalUnknown: return init::UnknownCopy{};
    case Approach::IncrementalCategory: return init::CategoryAverage{};
    case Approach::IncrementalSimilar: return init::FeatureSimilar{similarity(week, old_map)};
    case Approach::BaselineScratch: break;
  }
  throw Defect("baseline has no init strategy");
}

struct RunOutput {
  std::vector<WeeklyAuc> rows;
  std::vector<SkippedWeek> skipped;
};

inline void fresh_model(ClassifierParams& params, const VocabMap& vocab,
                        const ExperimentConfig& config, std::uint64_t seed, std::size_t week) {
  auto emb = new_random(vocab, config.dim, derive_seed(seed, week_label("embedding", week)),
                        config.init_scale);
  params = make_params(std::move(emb), config.aggregator);
  Rng head_rng(derive_seed(seed, week_label("head", week)));
  init_head(params, head_rng);
}

// The weekly loop for one (approach, seed).
inline RunOutput run_single(Approach approach, std::uint64_t seed, const ExperimentConfig& config,
                            std::span<const WeekSegment> segments, const RunOptions& options) {
  RunOutput out;
  const std::string name = approach_name(approach);
  const bool baseline = approach == Approach::BaselineScratch;
  VocabMap vocab;
  ClassifierParams params;

  for (std::size_t t = 0; t + 1 < segments.size(); ++t) {
    const auto& week = segments[t];
    const auto tokens = collect_tokens(week);

    if (t == 0 || baseline) {
      vocab = baseline && config.baseline_global_vocab
                  ? union_extend(vocab, tokens.tokens, tokens.categories)
                  : build_vocab(tokens.tokens, tokens.categories);
      fresh_model(params, vocab, config, seed, t);
    } else {
      VocabMap next = union_extend(vocab, tokens.tokens, tokens.categories);
      if (config.vocab_policy.mode == VocabPolicy::Mode::SlidingWindow) {
        std::unordered_set<Token> keep;
        const std::size_t first = t + 1 > config.vocab_policy.horizon ? t + 1 - config.vocab_policy.horizon : 0;
        for (std::size_t w = first; w <= t; ++w) {
          for (const auto& s : segments[w].sessions) {
            for (const auto& item : s.items) keep.insert(item.token);
          }
        }
        next = prune(next, keep);
      }
      const auto strategy = strategy_for(approach, config, week, vocab, options.similarity);
      Rng remap_rng(derive_seed(seed, week_label("remap", t)));
      auto emb = remap(next, vocab, params.emb, strategy, remap_rng);
      if (config.carry_head) {
        params.emb = std::move(emb);
      } else {
        params = make_params(std::move(emb), config.aggregator);
        Rng head_rng(derive_seed(seed, week_label("head", t)));
        init_head(params, head_rng);
      }
      vocab = std::move(next);
    }

    if (options.observer) options.observer({approach, seed, t, Stage::BeforeTraining, vocab, params});
    bool trainable = std::any_of(week.sessions.begin(), week.sessions.end(),
                                 [](const Session& s) { return !s.items.empty(); });
    if (!trainable) {
      out.skipped.push_back({name, t, seed, "training week has no sessions"});
      continue;
    }
    train_segment(params, vocab, week.sessions, config.train,
                  derive_seed(seed, week_label("shuffle", t)));
    if (options.observer) options.observer({approach, seed, t, Stage::AfterTraining, vocab, params});

    const auto& eval = segments[t + 1].sessions;
    const auto scores = score_sessions(params, vocab, eval, config.train.max_sequence_length);
    std::vector<ScoredLabel> labeled;
    labeled.reserve(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) {
      if (scores[i]) labeled.push_back({*scores[i], eval[i].label});
    }
    try {
      out.rows.push_back({name, t, seed, auc(labeled)});
    } catch (const UndefinedAuc& e) {
      out.skipped.push_back({name, t, seed, e.what()});
    }
  }
  return out;
}

}  // namespace detail

// Train on week t, evaluate on week t+1, for every approach and seed. Runs are
// independent and execute on up to config.jobs threads; the table is sorted by
// (approach, week, seed) so thread scheduling never shows in the output.
inline ResultTable run_experiment(const ExperimentConfig& config,
                                  std::span<const WeekSegment> segments,
                                  RunOptions options = {}) {
  config.validate();
  if (segments.size() < 2) {
    throw InvalidInput("experiment needs at least 2 weekly segments, got " +
                       std::to_string(segments.size()));
  }
  if (!options.similarity) options.similarity = co_occurrence_similarity;
  const auto started = std::chrono::steady_clock::now();

  struct Task {
    Approach approach;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (auto a : config.approaches) {
    for (auto s : config.seeds) tasks.push_back({a, s});
  }
  std::vector<detail::RunOutput> outputs(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        outputs[i] = detail::run_single(tasks[i].approach, tasks[i].seed, config, segments, options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t jobs = config.jobs ? config.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, tasks.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ResultTable table;
  for (auto& o : outputs) {
    table.rows.insert(table.rows.end(), o.rows.begin(), o.rows.end());
    table.skipped.insert(table.skipped.end(), o.skipped.begin(), o.skipped.end());
  }
  auto key = [](const auto& r) { return std::tuple(approach_rank(r.approach), r.approach, r.week, r.seed); };
  std::sort(table.rows.begin(), table.rows.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  std::sort(table.skipped.begin(), table.skipped.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });

  table.metadata.config = to_json(config);
  table.metadata.data_fingerprint = data_fingerprint(segments);
  table.metadata.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return table;
}

}  // namespace lleb
