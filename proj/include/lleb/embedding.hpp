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

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "lleb/error.hpp"
#include "lleb/random.hpp"
#include "lleb/vocab.hpp"

namespace lleb {

// Dense row-major table of 64-bit weights; row i belongs to token id i of the
// owning vocabulary.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::size_t rows, std::size_t dim)
      : rows_(rows), dim_(dim), weights_(rows * dim, 0.0) {
    if (rows == 0 || dim == 0) throw InvalidInput("embedding needs at least one row and one column");
  }

  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<double> weights)
      : rows_(rows), dim_(dim), weights_(std::move(weights)) {
    if (rows == 0 || dim == 0) throw InvalidInput("embedding needs at least one row and one column");
    if (weights_.size() != rows * dim) throw Defect("weight count does not match rows x dim");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<double> row(std::size_t i) {
    check_row(i);
    return {weights_.data() + i * dim_, dim_};
  }
  std::span<const double> row(std::size_t i) const {
    check_row(i);
    return {weights_.data() + i * dim_, dim_};
  }

  std::span<double> data() noexcept { return weights_; }
  std::span<const double> data() const noexcept { return weights_; }

  bool all_finite() const noexcept {
    for (double w : weights_) {
      if (!std::isfinite(w)) return false;
    }
    return true;
  }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  void check_row(std::size_t i) const {
    if (i >= rows_) {
      throw Defect("row " + std::to_string(i) + " out of range for embedding with " +
                   std::to_string(rows_) + " rows");
    }
  }

  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> weights_;
};

struct ScoredToken {
  Token token;
  double score = 0.0;
};

// Ranked similarity list for a new token; the caller owns the notion of
// "similar". An empty function behaves like an empty list.
using SimilarityRanking = std::function<std::vector<ScoredToken>(const Token&)>;

namespace init {

struct Random {
  double scale = 0.05;
};
struct UnknownCopy {};
struct GlobalAverage {};
struct CategoryAverage {};
struct FeatureSimilar {
  SimilarityRanking ranking;
};

}  // namespace init

using InitStrategy = std::variant<init::Random, init::UnknownCopy, init::GlobalAverage,
                                  init::CategoryAverage, init::FeatureSimilar>;

inline std::string strategy_name(const InitStrategy& strategy) {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, init::Random>) return "random";
        else if constexpr (std::is_same_v<S, init::UnknownCopy>) return "unknown";
        else if constexpr (std::is_same_v<S, init::GlobalAverage>) return "average";
        else if constexpr (std::is_same_v<S, init::CategoryAverage>) return "category";
        else return "similar";
      },
      strategy);
}

inline EmbeddingMatrix new_random(std::size_t vocab_size, std::size_t dim, std::uint64_t seed,
                                  double scale) {
  if (!(scale > 0.0)) throw InvalidInput("random init scale must be positive");
  EmbeddingMatrix emb(vocab_size, dim);
  Rng rng(seed);
  for (double& w : emb.data()) w = rng.uniform(-scale, scale);
  return emb;
}

inline EmbeddingMatrix new_random(const VocabMap& vocab, std::size_t dim, std::uint64_t seed,
                                  double scale) {
  return new_random(vocab.size(), dim, seed, scale);
}

namespace detail {

// Computes replacement rows against one (old_emb, old_map) pair. Means are
// cached so a remap with many new tokens averages each group once.
class RowInitializer {
 public:
  RowInitializer(const EmbeddingMatrix& old_emb, const VocabMap& old_map)
      : old_emb_(old_emb), old_map_(old_map) {
    if (old_emb.empty()) throw Defect("old embedding has no rows");
    if (old_emb.rows() != old_map.size()) {
      throw Defect("old embedding has " + std::to_string(old_emb.rows()) +
                   " rows but old vocabulary has " + std::to_string(old_map.size()) + " tokens");
    }
  }

  std::vector<double> operator()(const InitStrategy& strategy, const Token& token,
                                 std::optional<std::string_view> category, Rng& rng) {
    return std::visit(
        [&](const auto& s) -> std::vector<double> {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, init::Random>) {
            if (!(s.scale > 0.0)) throw InvalidInput("random init scale must be positive");
            std::vector<double> row(old_emb_.dim());
            for (double& w : row) w = rng.uniform(-s.scale, s.scale);
            return row;
          } else if constexpr (std::is_same_v<S, init::UnknownCopy>) {
            return unknown_row();
          } else if constexpr (std::is_same_v<S, init::GlobalAverage>) {
            return global_mean();
          } else if constexpr (std::is_same_v<S, init::CategoryAverage>) {
            return category_mean(category);
          } else {
            return most_similar(s, token, category);
          }
        },
        strategy);
  }

 private:
  std::vector<double> unknown_row() const {
    auto row = old_emb_.row(old_map_.lookup(kUnknownToken).value);
    return {row.begin(), row.end()};
  }

  std::vector<double> mean_of(std::span<const std::uint32_t> ids) const {
    std::vector<double> mean(old_emb_.dim(), 0.0);
    for (auto id : ids) {
      auto row = old_emb_.row(id);
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += row[k];
    }
    for (double& m : mean) m /= static_cast<double>(ids.size());
    return mean;
  }

  static bool finite(const std::vector<double>& row) {
    for (double w : row) {
      if (!std::isfinite(w)) return false;
    }
    return true;
  }

  std::vector<double> global_mean() {
    if (!global_) {
      std::vector<std::uint32_t> all(old_emb_.rows());
      for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
      global_ = mean_of(all);
    }
    // Summation can overflow on extreme weights; fall back to the UNK row.
    return finite(*global_) ? *global_ : unknown_row();
  }

  std::vector<double> category_mean(std::optional<std::string_view> category) {
    if (!category) return global_mean();
    auto it = category_means_.find(std::string(*category));
    if (it == category_means_.end()) {
      std::vector<std::uint32_t> members;
      auto tokens = old_map_.tokens();
      for (std::uint32_t i = 0; i < tokens.size(); ++i) {
        if (old_map_.category(tokens[i]) == category) members.push_back(i);
      }
      std::optional<std::vector<double>> mean;
      if (!members.empty()) mean = mean_of(members);
      it = category_means_.emplace(std::string(*category), std::move(mean)).first;
    }
    if (it->second && finite(*it->second)) return *it->second;
    return global_mean();
  }

  std::vector<double> most_similar(const init::FeatureSimilar& s, const Token& token,
                                   std::optional<std::string_view> category) {
    std::optional<TokenId> best;
    double best_score = 0.0;
    if (s.ranking) {
      for (const auto& candidate : s.ranking(token)) {
        if (!std::isfinite(candidate.score)) {
          throw InvalidInput("non-finite similarity score for '" + candidate.token + "'");
        }
        auto id = old_map_.find(candidate.token);
        if (!id) continue;
        if (!best || candidate.score > best_score) {
          best = id;
          best_score = candidate.score;
        }
      }
    }
    if (!best) return category_mean(category);
    auto row = old_emb_.row(best->value);
    return {row.begin(), row.end()};
  }

  const EmbeddingMatrix& old_emb_;
  const VocabMap& old_map_;
  std::optional<std::vector<double>> global_;
  std::map<std::string, std::optional<std::vector<double>>> category_means_;
};

}  // namespace detail

// Weights for a token absent from old_map. `category` is the new token's
// category, consulted by CategoryAverage and as FeatureSimilar's fallback.
inline std::vector<double> init_row(const InitStrategy& strategy, const EmbeddingMatrix& old_emb,
                                    const VocabMap& old_map, const Token& token,
                                    std::optional<std::string_view> category, Rng& rng) {
  detail::RowInitializer initializer(old_emb, old_map);
  return initializer(strategy, token, category, rng);
}

// Rebuilds an embedding against new_map: rows of tokens known to old_map are
// copied verbatim, the rest come from `strategy`. Tokens dropped from the map
// are simply not carried over. Random draws happen in ascending new-id order.
inline EmbeddingMatrix remap(const VocabMap& new_map, const VocabMap& old_map,
                             const EmbeddingMatrix& old_emb, const InitStrategy& strategy,
                             Rng& rng) {
  detail::RowInitializer initializer(old_emb, old_map);
  EmbeddingMatrix result(new_map.size(), old_emb.dim());
  auto tokens = new_map.tokens();
  for (std::size_t id = 0; id < tokens.size(); ++id) {
    auto dst = result.row(id);
    if (auto old_id = old_map.find(tokens[id])) {
      auto src = old_emb.row(old_id->value);
      std::copy(src.begin(), src.end(), dst.begin());
    } else {
      auto row = initializer(strategy, tokens[id], new_map.category(tokens[id]), rng);
      std::copy(row.begin(), row.end(), dst.begin());
    }
  }
  return result;
}

}  // namespace lleb
