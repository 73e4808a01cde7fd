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
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "lleb/error.hpp"
#include "lleb/session.hpp"

namespace lleb {

struct ScoredLabel {
  double score = 0.0;
  int label = 0;
};

// Mann-Whitney AUC with ties counted as 1/2. The statistic is accumulated in
// integers, (2 * wins + ties) / (2 * P * N), so the only rounding is the final
// division.
inline double auc(std::span<const ScoredLabel> data) {
  std::uint64_t positives = 0;
  for (const auto& d : data) {
    if (!std::isfinite(d.score)) throw InvalidInput("AUC input contains a non-finite score");
    if (d.label != 0 && d.label != 1) throw InvalidInput("AUC labels must be 0 or 1");
    positives += d.label;
  }
  const std::uint64_t negatives = data.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedAuc("AUC undefined: " + std::to_string(positives) + " positives, " +
                       std::to_string(negatives) + " negatives");
  }

  std::vector<ScoredLabel> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score < b.score; });

  // twice the number of (positive, negative) pairs won by the positive
  std::uint64_t doubled = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].label ? pos : neg) += 1;
      ++j;
    }
    doubled += pos * (2 * negatives_below + neg);
    negatives_below += neg;
    i = j;
  }
  return static_cast<double>(doubled) / (2.0 * static_cast<double>(positives) *
                                         static_cast<double>(negatives));
}

inline double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidInput("scores and labels differ in length");
  std::vector<ScoredLabel> data(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) data[i] = {scores[i], labels[i]};
  return auc(data);
}

struct WeeklyAuc {
  std::string approach;
  std::size_t week = 0;
  std::uint64_t seed = 0;
  double auc = 0.0;

  friend bool operator==(const WeeklyAuc&, const WeeklyAuc&) = default;
};

struct ApproachSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1); 0 when only one week exists
  std::map<std::size_t, double> per_week;  // seed-averaged AUC by week
};

inline double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

// Seeds are averaged within each week first; mean and sample std are then
// taken over the per-week means.
inline std::map<std::string, ApproachSummary> aggregate(std::span<const WeeklyAuc> results) {
  if (results.empty()) throw InvalidInput("nothing to aggregate");
  std::map<std::string, std::map<std::size_t, std::vector<double>>> grouped;
  for (const auto& r : results) grouped[r.approach][r.week].push_back(r.auc);

  std::map<std::string, ApproachSummary> out;
  for (const auto& [approach, weeks] : grouped) {
    ApproachSummary summary;
    std::vector<double> week_means;
    for (const auto& [week, values] : weeks) {
      const double m = mean_of(values);
      summary.per_week.emplace(week, m);
      week_means.push_back(m);
    }
    summary.mean = mean_of(week_means);
    summary.stddev = sample_stddev(week_means);
    out.emplace(approach, std::move(summary));
  }
  return out;
}

// count[t] = |items(t) \ items(0..t-1)|
inline std::vector<std::size_t> new_items_per_week(std::span<const std::vector<Token>> weeks) {
  std::unordered_set<Token> seen;
  std::vector<std::size_t> counts;
  counts.reserve(weeks.size());
  for (const auto& items : weeks) {
    std::size_t fresh = 0;
    for (const auto& item : items) fresh += seen.insert(item).second;
    counts.push_back(fresh);
  }
  return counts;
}

inline std::vector<std::size_t> new_items_per_week(std::span<const WeekSegment> segments) {
  std::vector<std::vector<Token>> weeks;
  weeks.reserve(segments.size());
  for (const auto& segment : segments) weeks.push_back(collect_tokens(segment).tokens);
  return new_items_per_week(std::span<const std::vector<Token>>(weeks));
}

}  // namespace lleb
