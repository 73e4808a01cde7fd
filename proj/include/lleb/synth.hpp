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
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lleb/data.hpp"
#include "lleb/error.hpp"
#include "lleb/model.hpp"
#include "lleb/random.hpp"
#include "lleb/session.hpp"

namespace lleb {

inline constexpr std::size_t kMaxSyntheticSessionLength = 50;

// 2014-04-01T00:00:00Z, the start of the YooChoose collection period.
inline constexpr Millis kSyntheticEpoch = 1396310400000LL;

struct SyntheticConfig {
  std::size_t weeks = 8;
  std::size_t initial_catalog = 500;
  std::size_t new_items_per_week = 50;
  std::size_t sessions_per_week = 2000;
  double mean_session_length = 5.0;
  std::size_t categories = 20;
  double label_sharpness = 3.0;
  std::uint64_t seed = 0;
  // Every item gets this latent quality instead of a sampled one.
  std::optional<double> fixed_quality;

  // Every invalid field, empty when the config is usable.
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (weeks < 1) out.push_back("weeks must be >= 1");
    if (initial_catalog < 1) out.push_back("initial_catalog must be >= 1");
    if (sessions_per_week < 1) out.push_back("sessions_per_week must be >= 1");
    if (categories < 1) out.push_back("categories must be >= 1");
    if (!(mean_session_length >= 1.0) || !std::isfinite(mean_session_length)) {
      out.push_back("mean_session_length must be a finite value >= 1");
    }
    if (!(label_sharpness > 0.0) || !std::isfinite(label_sharpness)) {
      out.push_back("label_sharpness must be a finite positive value");
    }
    // every new item has to fit into some session of its first week
    const std::size_t capacity = sessions_per_week * kMaxSyntheticSessionLength;
    if (initial_catalog > capacity) {
      out.push_back("initial_catalog exceeds sessions_per_week * 50");
    }
    if (new_items_per_week > capacity) {
      out.push_back("new_items_per_week exceeds sessions_per_week * 50");
    }
    if (fixed_quality && !std::isfinite(*fixed_quality)) out.push_back("fixed_quality must be finite");
    return out;
  }

  void validate() const {
    auto p = problems();
    if (p.empty()) return;
    std::string message = "invalid synthetic config:";
    for (const auto& s : p) message += " " + s + ";";
    throw InvalidInput(message);
  }
};

inline void to_json(nlohmann::json& j, const SyntheticConfig& c) {
  j = nlohmann::json{{"weeks", c.weeks},
                     {"initial_catalog", c.initial_catalog},
                     {"new_items_per_week", c.new_items_per_week},
                     {"sessions_per_week", c.sessions_per_week},
                     {"mean_session_length", c.mean_session_length},
                     {"categories", c.categories},
                     {"label_sharpness", c.label_sharpness},
                     {"seed", c.seed}};
  if (c.fixed_quality) j["fixed_quality"] = *c.fixed_quality;
}

// Unknown keys and wrongly typed values are reported together.
inline SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInput("synthetic config must be a JSON object");
  SyntheticConfig c;
  std::vector<std::string> problems;
  auto read_count = [&](const char* key, std::size_t& field) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      problems.push_back(std::string(key) + " must be a non-negative integer");
    } else {
      field = v.get<std::size_t>();
    }
  };
  auto read_real = [&](const char* key, double& field) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number()) {
      problems.push_back(std::string(key) + " must be a number");
    } else {
      field = j.at(key).get<double>();
    }
  };
  read_count("weeks", c.weeks);
  read_count("initial_catalog", c.initial_catalog);
  read_count("new_items_per_week", c.new_items_per_week);
  read_count("sessions_per_week", c.sessions_per_week);
  read_count("categories", c.categories);
  read_real("mean_session_length", c.mean_session_length);
  read_real("label_sharpness", c.label_sharpness);
  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      problems.push_back("seed must be a non-negative integer");
    } else {
      c.seed = j.at("seed").get<std::uint64_t>();
    }
  }
  if (j.contains("fixed_quality")) {
    double q = 0.0;
    read_real("fixed_quality", q);
    c.fixed_quality = q;
  }
  static const std::vector<std::string> kKnown = {
      "weeks",      "initial_catalog", "new_items_per_week", "sessions_per_week",
      "categories", "mean_session_length", "label_sharpness", "seed", "fixed_quality"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
      problems.push_back("unknown field '" + key + "'");
    }
  }
  for (const auto& p : c.problems()) problems.push_back(p);
  if (!problems.empty()) {
    std::string message = "invalid synthetic config:";
    for (const auto& p : problems) message += " " + p + ";";
    throw InvalidInput(message);
  }
  return c;
}

struct SyntheticData {
  std::vector<WeekSegment> segments;
  // Items introduced each week; week 0 holds the initial catalog.
  std::vector<std::size_t> new_item_schedule;
  std::vector<double> quality;         // by catalog index
  std::vector<std::size_t> category;   // by catalog index
};

inline Token synthetic_item_token(std::size_t index) { return std::to_string(1'000'000 + index); }

// Weekly sessions over a growing catalog.
//
// Item i belongs to category i mod C and has latent quality
// gamma_c + 0.5 * delta_i (both standard normal, drawn once). Session length is
// geometric with the configured mean, clamped to [1, 50]; items are drawn with
// weight 2 when introduced in the current or previous week, else 1. A session
// is a purchase with probability sigmoid(alpha * mean quality). Each week's new
// items are dealt round-robin into that week's sessions so every item is seen
// in the week it is introduced.
inline SyntheticData synth_generate(const SyntheticConfig& config) {
  config.validate();
  Rng rng(config.seed);
  SyntheticData out;

  const std::size_t total = config.initial_catalog + (config.weeks - 1) * config.new_items_per_week;
  std::vector<double> gamma(config.categories);
  for (double& g : gamma) g = rng.normal();
  out.quality.resize(total);
  out.category.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    out.category[i] = i % config.categories;
    const double delta = 0.5 * rng.normal();
    out.quality[i] = config.fixed_quality.value_or(gamma[out.category[i]] + delta);
  }

  std::vector<std::size_t> intro_week(total);
  std::vector<Session> all_sessions;
  std::size_t catalog = 0;
  std::uint64_t next_session_id = 1;
  const double p_stop = 1.0 / config.mean_session_length;

  for (std::size_t week = 0; week < config.weeks; ++week) {
    const std::size_t fresh = week == 0 ? config.initial_catalog : config.new_items_per_week;
    const std::size_t first_new = catalog;
    for (std::size_t i = catalog; i < catalog + fresh; ++i) intro_week[i] = week;
    catalog += fresh;
    out.new_item_schedule.push_back(fresh);

    std::vector<double> cumulative(catalog);
    double acc = 0.0;
    for (std::size_t i = 0; i < catalog; ++i) {
      acc += week - intro_week[i] < 2 ? 2.0 : 1.0;
      cumulative[i] = acc;
    }
    auto sample_item = [&] {
      const double u = rng.uniform01() * acc;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      return static_cast<std::size_t>(std::min<std::ptrdiff_t>(
          it - cumulative.begin(), static_cast<std::ptrdiff_t>(catalog - 1)));
    };

    std::vector<std::size_t> newcomers(fresh);
    for (std::size_t k = 0; k < fresh; ++k) newcomers[k] = first_new + k;
    rng.shuffle(std::span(newcomers));

    struct Draft {
      Millis start;
      std::vector<std::size_t> items;
      std::vector<Millis> offsets;
      int label;
    };
    std::vector<Draft> drafts(config.sessions_per_week);
    const Millis week_start = kSyntheticEpoch + static_cast<Millis>(week) * kMillisPerWeek;
    // Sessions last under an hour, so starting before the final hour keeps
    // every session inside its week.
    const Millis start_range = kMillisPerWeek - 60LL * 60 * 1000;
    for (std::size_t j = 0; j < drafts.size(); ++j) {
      auto& d = drafts[j];
      for (std::size_t k = j; k < fresh; k += drafts.size()) d.items.push_back(newcomers[k]);

      std::size_t length = 1;
      if (p_stop < 1.0) {
        const double u = 1.0 - rng.uniform01();  // (0, 1]
        length += static_cast<std::size_t>(std::floor(std::log(u) / std::log1p(-p_stop)));
      }
      length = std::clamp<std::size_t>(length, 1, kMaxSyntheticSessionLength);
      length = std::max(length, d.items.size());
      while (d.items.size() < length) d.items.push_back(sample_item());
      rng.shuffle(std::span(d.items));

      double q = 0.0;
      for (auto i : d.items) q += out.quality[i];
      q /= static_cast<double>(d.items.size());
      d.label = rng.bernoulli(sigmoid(config.label_sharpness * q)) ? 1 : 0;

      d.start = week_start + static_cast<Millis>(rng.below(static_cast<std::uint64_t>(start_range)));
      Millis offset = 0;
      for (std::size_t k = 0; k < d.items.size(); ++k) {
        d.offsets.push_back(offset);
        offset += 10'000 + static_cast<Millis>(rng.below(50'000));
      }
    }
    // Anchor the first week at the epoch so re-partitioning the exported CSV
    // reproduces the same weeks.
    if (week == 0) {
      auto earliest = std::min_element(drafts.begin(), drafts.end(),
                                       [](const Draft& a, const Draft& b) { return a.start < b.start; });
      earliest->start = week_start;
    }
    std::stable_sort(drafts.begin(), drafts.end(),
                     [](const Draft& a, const Draft& b) { return a.start < b.start; });

    for (auto& d : drafts) {
      Session s{std::to_string(next_session_id++), {}, d.label};
      for (std::size_t k = 0; k < d.items.size(); ++k) {
        const auto i = d.items[k];
        s.items.push_back({synthetic_item_token(i), d.start + d.offsets[k],
                           std::to_string(out.category[i])});
      }
      all_sessions.push_back(std::move(s));
    }
  }
  out.segments = partition_weeks(all_sessions);
  return out;
}

}  // namespace lleb
