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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "lleb/metrics.hpp"
#include "lleb/random.hpp"
#include "oracles.hpp"

namespace lleb {
namespace {

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}), 0.0);
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
  EXPECT_EQ(auc(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}), 0.5);
}

TEST(Auc, Errors) {
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedAuc);
  EXPECT_THROW(auc(std::vector<double>{}, std::vector<int>{}), UndefinedAuc);
  EXPECT_THROW(auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), InvalidInput);
  EXPECT_THROW(auc(std::vector<double>{NAN, 0.2}, std::vector<int>{1, 0}), InvalidInput);
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{2, 0}), InvalidInput);
}

struct RandomScores {
  std::vector<double> scores;
  std::vector<int> labels;
};

RandomScores random_scores(Rng& rng) {
  RandomScores r;
  const std::size_t n = 2 + rng.below(199);
  const std::size_t levels = 1 + rng.below(12);  // few levels -> many ties
  for (std::size_t i = 0; i < n; ++i) {
    r.scores.push_back(static_cast<double>(rng.below(levels)) / 7.0);
    r.labels.push_back(static_cast<int>(rng.below(2)));
  }
  r.labels[0] = 1;
  r.labels[1] = 0;
  return r;
}

TEST(Auc, MatchesBruteForceWithTies) {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    auto r = random_scores(rng);
    EXPECT_NEAR(auc(r.scores, r.labels), testing::brute_force_auc(r.scores, r.labels), 1e-12);
  }
}

TEST(Auc, InvariantUnderIncreasingTransform) {
  Rng rng(78);
  for (int trial = 0; trial < 100; ++trial) {
    auto r = random_scores(rng);
    std::vector<double> transformed;
    for (double s : r.scores) transformed.push_back(std::exp(3.0 * s) - 10.0);
    EXPECT_EQ(auc(r.scores, r.labels), auc(transformed, r.labels));
  }
}

TEST(Auc, ComplementSymmetry) {
  Rng rng(79);
  for (int trial = 0; trial < 100; ++trial) {
    auto r = random_scores(rng);
    std::vector<int> flipped;
    for (int l : r.labels) flipped.push_back(1 - l);
    EXPECT_NEAR(auc(r.scores, r.labels) + auc(r.scores, flipped), 1.0, 1e-12);
  }
}

TEST(Aggregate, SingleRowHasZeroStd) {
  std::vector<WeeklyAuc> rows{{"unknown", 0, 1, 0.7}};
  auto s = aggregate(rows);
  EXPECT_DOUBLE_EQ(s.at("unknown").mean, 0.7);
  EXPECT_EQ(s.at("unknown").stddev, 0.0);
}

TEST(Aggregate, SampleStdOverWeekMeans) {
  // seeds are averaged within the week before the spread is computed
  std::vector<WeeklyAuc> rows{{"a", 0, 1, 0.5}, {"a", 0, 2, 0.7}, {"a", 1, 1, 0.8}, {"b", 0, 1, 0.9}};
  auto s = aggregate(rows);
  EXPECT_NEAR(s.at("a").per_week.at(0), 0.6, 1e-15);
  EXPECT_NEAR(s.at("a").mean, 0.7, 1e-15);
  EXPECT_NEAR(s.at("a").stddev, 0.14142135623730956, 1e-12);
  EXPECT_EQ(s.at("b").per_week.size(), 1u);
  EXPECT_THROW(aggregate(std::vector<WeeklyAuc>{}), InvalidInput);
}

TEST(NewItemsPerWeek, Examples) {
  using Weeks = std::vector<std::vector<Token>>;
  auto run = [](const Weeks& w) { return new_items_per_week(std::span<const std::vector<Token>>(w)); };
  EXPECT_EQ(run({{"a", "b"}}), (std::vector<std::size_t>{2}));
  EXPECT_EQ(run({{"a", "b"}, {"b", "c"}}), (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(run({{"a"}, {"a"}, {"a"}}), (std::vector<std::size_t>{1, 0, 0}));
  EXPECT_EQ(run({{"a", "a", "a"}}), (std::vector<std::size_t>{1}));
}

TEST(NewItemsPerWeek, SumsToDistinctItems) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<Token>> weeks(1 + rng.below(6));
    std::set<Token> all;
    for (auto& w : weeks) {
      for (std::size_t i = rng.below(30); i > 0; --i) {
        w.push_back("i" + std::to_string(rng.below(40)));
        all.insert(w.back());
      }
    }
    auto counts = new_items_per_week(std::span<const std::vector<Token>>(weeks));
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), all.size());
  }
}

}  // namespace
}  // namespace lleb
