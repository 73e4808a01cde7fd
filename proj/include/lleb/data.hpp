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
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lleb/error.hpp"
#include "lleb/session.hpp"

namespace lleb {

// ---------------------------------------------------------------------------
// Timestamps

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian date.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  std::int64_t year;
  unsigned month, day;
};

constexpr CivilDate civil_from_days(std::int64_t z) noexcept {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {y + (m <= 2), m, d};
}

inline bool parse_digits(std::string_view s, std::size_t pos, std::size_t n, unsigned& out) {
  if (pos + n > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + static_cast<unsigned>(s[i] - '0');
  }
  return true;
}

}  // namespace detail

// Parses "YYYY-MM-DDTHH:MM:SS[.fff]Z". Fractions beyond milliseconds are
// truncated.
inline std::optional<Millis> parse_timestamp(std::string_view s) {
  unsigned year, month, day, hour, minute, second;
  if (!detail::parse_digits(s, 0, 4, year) || s.size() < 20 || s[4] != '-' ||
      !detail::parse_digits(s, 5, 2, month) || s[7] != '-' ||
      !detail::parse_digits(s, 8, 2, day) || s[10] != 'T' ||
      !detail::parse_digits(s, 11, 2, hour) || s[13] != ':' ||
      !detail::parse_digits(s, 14, 2, minute) || s[16] != ':' ||
      !detail::parse_digits(s, 17, 2, second)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  unsigned millis = 0;
  if (s[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + static_cast<unsigned>(s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (std::size_t i = digits; i < 3; ++i) millis *= 10;
  }
  if (pos + 1 != s.size() || s[pos] != 'Z') return std::nullopt;
  static constexpr unsigned kDaysInMonth[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12 || day < 1 || day > kDaysInMonth[month - 1] || hour > 23 ||
      minute > 59 || second > 59) {
    return std::nullopt;
  }
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  if (month == 2 && day == 29 && !leap) return std::nullopt;
  const std::int64_t days = detail::days_from_civil(year, month, day);
  return ((days * 24 + hour) * 60 + minute) * 60'000LL + second * 1000LL + millis;
}

inline std::string format_timestamp(Millis t) {
  std::int64_t days = t / kMillisPerDay;
  std::int64_t rem = t % kMillisPerDay;
  if (rem < 0) {
    rem += kMillisPerDay;
    --days;
  }
  const auto date = detail::civil_from_days(days);
  const auto ms = static_cast<unsigned>(rem % 1000);
  const auto secs = static_cast<unsigned>(rem / 1000);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02u:%02u:%02u.%03uZ",
                static_cast<long long>(date.year), date.month, date.day, secs / 3600,
                (secs / 60) % 60, secs % 60, ms);
  return buf;
}

// ---------------------------------------------------------------------------
// CSV logs

struct ClickEvent {
  std::string session_id;
  Millis timestamp = 0;
  Token item;
  std::optional<std::string> category;

  friend bool operator==(const ClickEvent&, const ClickEvent&) = default;
};

struct MalformedLine {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct ClickLog {
  std::vector<ClickEvent> events;
  std::vector<MalformedLine> malformed;
  std::vector<std::string> warnings;
};

struct BuyLog {
  std::unordered_set<std::string> sessions;
  std::vector<MalformedLine> malformed;
  std::vector<std::string> warnings;
};

// Malformed lines are tolerated up to this fraction of all non-empty lines.
inline constexpr double kMaxMalformedFraction = 0.01;

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// Calls `parse(fields, line_no)` for each non-empty line; it returns an error
// reason or an empty string.
template <typename ParseLine>
void scan_csv(std::istream& in, const std::string& name, std::vector<MalformedLine>& malformed,
              std::vector<std::string>& warnings, ParseLine parse) {
  std::string line;
  std::size_t line_no = 0, non_empty = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++non_empty;
    std::string reason = parse(split_commas(line));
    if (!reason.empty()) malformed.push_back({line_no, std::move(reason)});
  }
  if (non_empty == 0) {
    warnings.push_back(name + ": file is empty");
    return;
  }
  if (malformed.empty()) return;
  const double fraction = static_cast<double>(malformed.size()) / static_cast<double>(non_empty);
  const auto& first = malformed.front();
  if (fraction > kMaxMalformedFraction) {
    throw ParseError(name, first.line,
                     first.reason + " (" + std::to_string(malformed.size()) + " of " +
                         std::to_string(non_empty) + " lines malformed)");
  }
  warnings.push_back(name + ": skipped " + std::to_string(malformed.size()) +
                     " malformed line(s), first at line " + std::to_string(first.line) + ": " +
                     first.reason);
}

inline std::ifstream open_for_reading(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

}  // namespace detail

// Clicks: session,timestamp,item,category
inline ClickLog read_clicks(std::istream& in, const std::string& name = "<clicks>") {
  ClickLog log;
  detail::scan_csv(in, name, log.malformed, log.warnings,
                   [&](const std::vector<std::string_view>& f) -> std::string {
                     if (f.size() != 4) return "expected 4 fields, got " + std::to_string(f.size());
                     if (f[0].empty()) return "empty session id";
                     auto ts = parse_timestamp(f[1]);
                     if (!ts) return "bad timestamp '" + std::string(f[1]) + "'";
                     if (f[2].empty()) return "empty item";
                     if (f[2] == kUnknownToken) return "reserved item id " + std::string(kUnknownToken);
                     ClickEvent e{std::string(f[0]), *ts, Token(f[2]), std::nullopt};
                     if (!f[3].empty()) e.category = std::string(f[3]);
                     log.events.push_back(std::move(e));
                     return {};
                   });
  return log;
}

inline ClickLog load_clicks(const std::filesystem::path& path) {
  auto in = detail::open_for_reading(path);
  return read_clicks(in, path.string());
}

// Buys: session,timestamp,item,price,quantity. Only session ids are kept.
inline BuyLog read_buys(std::istream& in, const std::string& name = "<buys>") {
  BuyLog log;
  detail::scan_csv(in, name, log.malformed, log.warnings,
                   [&](const std::vector<std::string_view>& f) -> std::string {
                     if (f.size() != 5) return "expected 5 fields, got " + std::to_string(f.size());
                     if (f[0].empty()) return "empty session id";
                     if (!parse_timestamp(f[1])) return "bad timestamp '" + std::string(f[1]) + "'";
                     log.sessions.emplace(f[0]);
                     return {};
                   });
  return log;
}

inline BuyLog load_buys(const std::filesystem::path& path) {
  auto in = detail::open_for_reading(path);
  return read_buys(in, path.string());
}

// ---------------------------------------------------------------------------
// Sessions and weeks

struct SessionAssembly {
  std::vector<Session> sessions;
  std::size_t orphan_buys = 0;  // buy session ids with no clicks
  std::vector<std::string> warnings;
};

// Groups clicks by session id, sorts each session's items by time (stable),
// labels sessions found in `buy_sessions`, and orders sessions by first event
// (ties keep file order).
inline SessionAssembly assemble_sessions(std::span<const ClickEvent> clicks,
                                         const std::unordered_set<std::string>& buy_sessions) {
  SessionAssembly out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& c : clicks) {
    auto [it, inserted] = index.try_emplace(c.session_id, out.sessions.size());
    if (inserted) out.sessions.push_back(Session{c.session_id, {}, 0});
    out.sessions[it->second].items.push_back({c.item, c.timestamp, c.category});
  }
  for (auto& s : out.sessions) {
    std::stable_sort(s.items.begin(), s.items.end(),
                     [](const SessionItem& a, const SessionItem& b) { return a.timestamp < b.timestamp; });
    s.label = buy_sessions.contains(s.id) ? 1 : 0;
  }
  std::stable_sort(out.sessions.begin(), out.sessions.end(),
                   [](const Session& a, const Session& b) { return a.first_event() < b.first_event(); });
  for (const auto& id : buy_sessions) out.orphan_buys += !index.contains(id);
  if (out.orphan_buys > 0) {
    out.warnings.push_back(std::to_string(out.orphan_buys) +
                           " buy session id(s) have no clicks and were ignored");
  }
  return out;
}

// Consecutive 7-day half-open windows anchored at the earliest first event.
// A session goes to the window holding its first event; empty windows in the
// middle are kept so indices stay calendar-aligned. The last window is flagged
// partial when the data stops more than a day before its end.
inline std::vector<WeekSegment> partition_weeks(std::span<const Session> sessions) {
  if (sessions.empty()) throw InvalidInput("cannot partition an empty session list");
  Millis anchor = sessions.front().first_event();
  Millis last_event = anchor;
  for (const auto& s : sessions) {
    if (s.items.empty()) throw InvalidInput("session '" + s.id + "' has no items");
    anchor = std::min(anchor, s.first_event());
    for (const auto& item : s.items) last_event = std::max(last_event, item.timestamp);
  }
  std::vector<WeekSegment> segments;
  for (const auto& s : sessions) {
    const auto week = static_cast<std::size_t>((s.first_event() - anchor) / kMillisPerWeek);
    while (segments.size() <= week) {
      const std::size_t i = segments.size();
      const Millis start = anchor + static_cast<Millis>(i) * kMillisPerWeek;
      segments.push_back(WeekSegment{i, start, start + kMillisPerWeek, {}, false});
    }
    segments[week].sessions.push_back(s);
  }
  segments.back().partial = last_event < segments.back().end - kMillisPerDay;
  return segments;
}

// ---------------------------------------------------------------------------
// Export in the same CSV layouts

inline void write_clicks(std::ostream& out, std::span<const WeekSegment> segments) {
  for (const auto& seg : segments) {
    for (const auto& s : seg.sessions) {
      for (const auto& item : s.items) {
        out << s.id << ',' << format_timestamp(item.timestamp) << ',' << item.token << ','
            << item.category.value_or("") << '\n';
      }
    }
  }
}

// One buy line per purchasing session, on its last viewed item.
inline void write_buys(std::ostream& out, std::span<const WeekSegment> segments) {
  for (const auto& seg : segments) {
    for (const auto& s : seg.sessions) {
      if (s.label != 1 || s.items.empty()) continue;
      const auto& last = s.items.back();
      out << s.id << ',' << format_timestamp(last.timestamp) << ',' << last.token << ",0,1\n";
    }
  }
}

}  // namespace lleb
