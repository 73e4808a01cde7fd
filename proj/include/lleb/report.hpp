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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lleb/error.hpp"
#include "lleb/harness.hpp"
#include "lleb/metrics.hpp"

namespace lleb {

enum class ExportFormat { Csv, Json };

namespace detail {

// Shortest form that parses back to the same double.
inline std::string exact_number(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string fixed(double v, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw InvalidInput("failed writing " + path.string());
}

}  // namespace detail

inline std::string results_csv(const ResultTable& table) {
  std::string out = "approach,week,seed,auc\n";
  for (const auto& r : table.rows) {
    out += r.approach + ',' + std::to_string(r.week) + ',' + std::to_string(r.seed) + ',' +
           detail::exact_number(r.auc) + '\n';
  }
  return out;
}

inline nlohmann::json results_json(const ResultTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"approach", r.approach}, {"week", r.week}, {"seed", r.seed}, {"auc", r.auc}});
  }
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : table.skipped) {
    skipped.push_back({{"approach", s.approach}, {"week", s.week}, {"seed", s.seed}, {"reason", s.reason}});
  }
  nlohmann::json summary = nlohmann::json::object();
  if (!table.rows.empty()) {
    for (const auto& [approach, s] : aggregate(table.rows)) {
      nlohmann::json per_week = nlohmann::json::array();
      for (const auto& [week, value] : s.per_week) per_week.push_back({{"week", week}, {"auc", value}});
      summary[approach] = {{"mean", s.mean}, {"std", s.stddev}, {"per_week", per_week}};
    }
  }
  return {{"metadata",
           {{"config", table.metadata.config},
            {"data_fingerprint", table.metadata.data_fingerprint},
            {"wall_clock_seconds", table.metadata.wall_clock_seconds},
            {"std_convention", kStdConvention}}},
          {"rows", rows},
          {"skipped", skipped},
          {"summary", summary}};
}

inline ResultTable results_from_json(const nlohmann::json& j) {
  ResultTable table;
  try {
    for (const auto& r : j.at("rows")) {
      table.rows.push_back({r.at("approach").get<std::string>(), r.at("week").get<std::size_t>(),
                            r.at("seed").get<std::uint64_t>(), r.at("auc").get<double>()});
    }
    for (const auto& s : j.at("skipped")) {
      table.skipped.push_back({s.at("approach").get<std::string>(), s.at("week").get<std::size_t>(),
                               s.at("seed").get<std::uint64_t>(), s.at("reason").get<std::string>()});
    }
    const auto& meta = j.at("metadata");
    table.metadata.config = meta.at("config");
    table.metadata.data_fingerprint = meta.at("data_fingerprint").get<std::string>();
    table.metadata.wall_clock_seconds = meta.at("wall_clock_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed results JSON: ") + e.what());
  }
  return table;
}

inline void export_results(const ResultTable& table, const std::filesystem::path& path,
                           ExportFormat format) {
  if (format == ExportFormat::Csv) {
    detail::write_text(path, results_csv(table));
  } else {
    detail::write_text(path, results_json(table).dump(2) + "\n");
  }
}

inline ResultTable import_results_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  try {
    return results_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("malformed results JSON: ") + e.what());
  }
}

// Line chart of seed-averaged AUC per week, one polyline per approach.
inline std::string chart_svg(const ResultTable& table) {
  if (table.rows.empty()) throw InvalidInput("cannot chart an empty result table");
  const auto summary = aggregate(table.rows);
  std::vector<std::pair<std::string, const ApproachSummary*>> series;
  for (const auto& [name, s] : summary) series.emplace_back(name, &s);
  std::stable_sort(series.begin(), series.end(), [](const auto& a, const auto& b) {
    return approach_rank(a.first) < approach_rank(b.first);
  });

  std::size_t first_week = SIZE_MAX, last_week = 0;
  double lo = 1.0, hi = 0.0;
  for (const auto& [name, s] : series) {
    for (const auto& [week, value] : s->per_week) {
      first_week = std::min(first_week, week);
      last_week = std::max(last_week, week);
      lo = std::min(lo, value);
      hi = std::max(hi, value);
    }
  }
  lo = std::max(0.0, std::floor(lo * 20.0) / 20.0);
  hi = std::min(1.0, std::ceil(hi * 20.0) / 20.0);
  if (hi - lo < 0.05) {
    lo = std::max(0.0, lo - 0.05);
    hi = std::min(1.0, hi + 0.05);
  }

  constexpr double kWidth = 800, kHeight = 480;
  constexpr double kLeft = 70, kRight = 170, kTop = 30, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double span_weeks = last_week > first_week ? static_cast<double>(last_week - first_week) : 1.0;
  auto x_of = [&](std::size_t week) {
    return kLeft + plot_w * static_cast<double>(week - first_week) / span_weeks;
  };
  auto y_of = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

  static constexpr const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  using detail::fixed;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<g class=\"axes\" stroke=\"black\">\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w
      << "\" y2=\"" << kTop + plot_h << "\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kTop + plot_h << "\"/>\n</g>\n";

  svg << "<g class=\"ticks\">\n";
  for (std::size_t w = first_week; w <= last_week; ++w) {
    const double x = x_of(w);
    svg << "<text x=\"" << fixed(x, 2) << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\">" << w << "</text>\n";
  }
  const int ticks = static_cast<int>(std::lround((hi - lo) / 0.05));
  const int stride = ticks > 10 ? 2 : 1;
  for (int k = 0; k <= ticks; k += stride) {
    const double v = lo + 0.05 * k;
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << fixed(y_of(v) + 4, 2)
        << "\" text-anchor=\"end\">" << fixed(v, 2) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\">training week</text>\n";
  svg << "<text x=\"18\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kTop + plot_h / 2 << ")\">AUC (next week)</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& [name, s] = series[i];
    const char* color = kColors[i % std::size(kColors)];
    svg << "<polyline class=\"series\" data-approach=\"" << name << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (const auto& [week, value] : s->per_week) {
      svg << (first ? "" : " ") << fixed(x_of(week), 2) << ',' << fixed(y_of(value), 2);
      first = false;
    }
    svg << "\"/>\n";
    for (const auto& [week, value] : s->per_week) {
      svg << "<circle cx=\"" << fixed(x_of(week), 2) << "\" cy=\"" << fixed(y_of(value), 2)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
  }

  svg << "<g class=\"legend\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = kTop + 10 + 20.0 * static_cast<double>(i);
    const double x = kLeft + plot_w + 20;
    svg << "<g class=\"legend-entry\"><line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x + 24
        << "\" y2=\"" << y << "\" stroke=\"" << kColors[i % std::size(kColors)]
        << "\" stroke-width=\"2\"/><text x=\"" << x + 30 << "\" y=\"" << y + 4 << "\">"
        << series[i].first << "</text></g>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

inline void render_chart(const ResultTable& table, const std::filesystem::path& path) {
  detail::write_text(path, chart_svg(table));
}

}  // namespace lleb
