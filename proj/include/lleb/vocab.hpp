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

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lleb/error.hpp"

namespace lleb {

using Token = std::string;

inline constexpr std::string_view kUnknownToken = "<UNK>";

struct TokenId {
  std::uint32_t value = 0;

  friend constexpr auto operator<=>(TokenId, TokenId) = default;
};

inline constexpr TokenId kUnknownId{0};

using CategoryMap = std::unordered_map<Token, std::string>;

// Bijective token <-> id mapping with "<UNK>" pinned at id 0 and ids
// contiguous in 0..size-1. Immutable once built; construct through
// build_vocab / union_extend / prune / from_ordered.
class VocabMap {
 public:
  VocabMap() : tokens_{Token(kUnknownToken)} { index_.emplace(tokens_.front(), 0); }

  // Builds a map from tokens listed in id order. tokens[0] must be "<UNK>".
  // Throws InvalidInput on duplicates, empty tokens or a misplaced "<UNK>".
  static VocabMap from_ordered(std::vector<Token> tokens, CategoryMap categories = {}) {
    if (tokens.empty() || tokens.front() != kUnknownToken) {
      throw InvalidInput("vocabulary must start with " + std::string(kUnknownToken));
    }
    VocabMap vocab;
    vocab.tokens_.clear();
    vocab.index_.clear();
    vocab.index_.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].empty()) throw InvalidInput("empty token at id " + std::to_string(i));
      if (!vocab.index_.emplace(tokens[i], static_cast<std::uint32_t>(i)).second) {
        throw InvalidInput("duplicate token '" + tokens[i] + "'");
      }
    }
    vocab.tokens_ = std::move(tokens);
    for (auto& [token, category] : categories) {
      if (token != kUnknownToken && vocab.index_.contains(token)) {
        vocab.categories_.emplace(token, std::move(category));
      }
    }
    return vocab;
  }

  std::size_t size() const noexcept { return tokens_.size(); }

  // Tokens in id order.
  std::span<const Token> tokens() const noexcept { return tokens_; }

  const Token& token(TokenId id) const {
    if (id.value >= tokens_.size()) {
      throw Defect("token id " + std::to_string(id.value) + " out of range for vocabulary of size " +
                   std::to_string(tokens_.size()));
    }
    return tokens_[id.value];
  }

  bool contains(std::string_view token) const { return index_.contains(Token(token)); }

  std::optional<TokenId> find(std::string_view token) const {
    auto it = index_.find(Token(token));
    if (it == index_.end()) return std::nullopt;
    return TokenId{it->second};
  }

  // Total: absent tokens resolve to the unknown token.
  TokenId lookup(std::string_view token) const { return find(token).value_or(kUnknownId); }

  std::optional<std::string_view> category(std::string_view token) const {
    auto it = categories_.find(Token(token));
    if (it == categories_.end()) return std::nullopt;
    return std::string_view(it->second);
  }

  bool has_categories() const noexcept { return !categories_.empty(); }
  const CategoryMap& categories() const noexcept { return categories_; }

  friend bool operator==(const VocabMap& a, const VocabMap& b) {
    return a.tokens_ == b.tokens_ && a.categories_ == b.categories_;
  }

 private:
  friend VocabMap union_extend(const VocabMap&, std::span<const Token>, const CategoryMap&);

  void append(const Token& token) {
    index_.emplace(token, static_cast<std::uint32_t>(tokens_.size()));
    tokens_.push_back(token);
  }

  std::vector<Token> tokens_;
  std::unordered_map<Token, std::uint32_t> index_;
  CategoryMap categories_;
};

namespace detail {

inline void reject_reserved(std::span<const Token> tokens) {
  for (const auto& token : tokens) {
    if (token == kUnknownToken) {
      throw InvalidInput("input contains the reserved token " + std::string(kUnknownToken));
    }
    if (token.empty()) throw InvalidInput("input contains an empty token");
  }
}

}  // namespace detail

// Keeps every id of `old`, appends unseen tokens in first-occurrence order.
// Categories are merged; `categories` wins on conflict.
inline VocabMap union_extend(const VocabMap& old, std::span<const Token> new_tokens,
                             const CategoryMap& categories = {}) {
  detail::reject_reserved(new_tokens);
  VocabMap result = old;
  for (const auto& token : new_tokens) {
    if (!result.index_.contains(token)) result.append(token);
  }
  for (const auto& [token, category] : categories) {
    if (token != kUnknownToken && result.index_.contains(token)) {
      result.categories_.insert_or_assign(token, category);
    }
  }
  return result;
}

// "<UNK>" at 0, then distinct tokens in first-occurrence order.
inline VocabMap build_vocab(std::span<const Token> tokens, const CategoryMap& categories = {}) {
  return union_extend(VocabMap{}, tokens, categories);
}

inline TokenId lookup(const VocabMap& vocab, std::string_view token) { return vocab.lookup(token); }

// Survivors of `keep` re-indexed contiguously in their old relative order.
inline VocabMap prune(const VocabMap& old, const std::unordered_set<Token>& keep) {
  std::vector<Token> tokens{Token(kUnknownToken)};
  CategoryMap categories;
  for (const auto& token : old.tokens().subspan(1)) {
    if (!keep.contains(token)) continue;
    tokens.push_back(token);
    if (auto category = old.category(token)) categories.emplace(token, std::string(*category));
  }
  return VocabMap::from_ordered(std::move(tokens), std::move(categories));
}

}  // namespace lleb
