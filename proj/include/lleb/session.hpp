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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lleb/vocab.hpp"

namespace lleb {

// Milliseconds since the Unix epoch, UTC.
using Millis = std::int64_t;

inline constexpr Millis kMillisPerDay = 24LL * 60 * 60 * 1000;
inline constexpr Millis kMillisPerWeek = 7 * kMillisPerDay;

struct SessionItem {
  Token token;
  Millis timestamp = 0;
  std::optional<std::string> category;

  friend bool operator==(const SessionItem&, const SessionItem&) = default;
};

// One user's viewing history, time-ordered, labeled 1 when a purchase occurred.
struct Session {
  std::string id;
  std::vector<SessionItem> items;
  int label = 0;

  Millis first_event() const { return items.empty() ? 0 : items.front().timestamp; }

  friend bool operator==(const Session&, const Session&) = default;
};

// Half-open [start, end) window of sessions keyed by their first event.
struct WeekSegment {
  std::size_t index = 0;
  Millis start = 0;
  Millis end = 0;
  std::vector<Session> sessions;
  bool partial = false;

  friend bool operator==(const WeekSegment&, const WeekSegment&) = default;
};

// Tokens of the segment in first-occurrence order (duplicates kept) and the
// categories observed for them; the input to build_vocab / union_extend.
struct SegmentTokens {
  std::vector<Token> tokens;
  CategoryMap categories;
};

inline SegmentTokens collect_tokens(const WeekSegment& segment) {
  SegmentTokens out;
  for (const auto& session : segment.sessions) {
    for (const auto& item : session.items) {
      out.tokens.push_back(item.token);
      if (item.category) out.categories.insert_or_assign(item.token, *item.category);
    }
  }
  return out;
}

}  // namespace lleb
