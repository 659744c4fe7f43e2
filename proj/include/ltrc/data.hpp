/*
 * Copyright 2026 The ltrcdr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Observed left-truncated right-censored records, CSV ingestion, validation,
// fold assignment and probability trimming.

#ifndef LTRC_DATA_HPP
#define LTRC_DATA_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ltrc/error.hpp"
#include "ltrc/rng.hpp"

namespace ltrc {

// One subject's observed tuple (Q, X, Delta, A, Z).
struct ObservedRecord {
  double q = 0.0;      // entry (left-truncation) time
  double x = 0.0;      // min(event, censoring)
  int delta = 0;       // 1 if the event was observed
  int a = 0;           // treatment
  std::vector<double> z;

  bool operator==(const ObservedRecord&) const = default;
};

// Potential outcomes for one simulated subject; never observable.
struct FullRecord {
  double t1 = 0.0;  // event time under a = 1
  double t0 = 0.0;  // event time under a = 0
  double q = 0.0;   // factual truncation time
  double d = 0.0;   // factual residual censoring time
  int a = 0;
  std::vector<double> z;
};

struct Dataset {
  std::size_t p = 0;  // covariate dimension
  std::vector<ObservedRecord> records;

  std::size_t size() const { return records.size(); }
  const ObservedRecord& operator[](std::size_t i) const { return records[i]; }

  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.p = p;
    out.records.reserve(idx.size());
    for (std::size_t i : idx) out.records.push_back(records[i]);
    return out;
  }

  bool operator==(const Dataset&) const = default;
};

// Known bounded transformation nu applied to event times.
class Transform {
 public:
  enum class Kind { kSurvivalIndicator, kRmst, kLog };

  static Transform survival_indicator(double t0) {
    return Transform(Kind::kSurvivalIndicator, t0);
  }
  static Transform rmst(double t0) { return Transform(Kind::kRmst, t0); }
  static Transform log() { return Transform(Kind::kLog, 0.0); }

  Kind kind() const { return kind_; }
  double t0() const { return t0_; }

  double operator()(double t) const {
    switch (kind_) {
      case Kind::kSurvivalIndicator:
        return t > t0_ ? 1.0 : 0.0;
      case Kind::kRmst:
        return std::min(t, t0_);
      case Kind::kLog:
        return std::log(t);
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind_) {
      case Kind::kSurvivalIndicator:
        return "survival_indicator";
      case Kind::kRmst:
        return "rmst";
      case Kind::kLog:
        return "log";
    }
    return "";
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"kind", name()}};
    if (kind_ != Kind::kLog) j["t0"] = t0_;
    return j;
  }

  static Transform from_json(const nlohmann::json& j) {
    for (const auto& [key, _] : j.items()) {
      if (key != "kind" && key != "t0") {
        throw SchemaError("unknown key in nu spec: " + key);
      }
    }
    if (!j.contains("kind")) throw SchemaError("nu spec missing 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "log") return log();
    if (!j.contains("t0")) throw SchemaError("nu spec '" + kind + "' needs t0");
    const double t0 = j.at("t0").get<double>();
    if (kind == "survival_indicator") return survival_indicator(t0);
    if (kind == "rmst") return rmst(t0);
    throw SchemaError("unknown nu kind: " + kind);
  }

 private:
  Transform(Kind kind, double t0) : kind_(kind), t0_(t0) {}

  Kind kind_;
  double t0_;
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  for (auto& c : cells) {
    while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
    while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r')) {
      c.remove_suffix(1);
    }
  }
  return cells;
}

// Locale-independent strict parse of a whole cell.
inline double parse_double(std::string_view cell, std::size_t row,
                           std::size_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError("non-numeric cell '" + std::string(cell) + "'", row, col);
  }
  return value;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline std::vector<std::string> expected_header(std::size_t p) {
  std::vector<std::string> cols{"q", "x", "delta", "a"};
  for (std::size_t j = 1; j <= p; ++j) cols.push_back("z" + std::to_string(j));
  return cols;
}

// Parses `q,x,delta,a,z1,...,zp` text. Rows are 1-based and count the header.
inline Dataset parse_observed_csv(std::istream& in, std::size_t p) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV: missing header row");
  const auto header = detail::split_csv_line(line);
  const auto expected = expected_header(p);
  for (std::size_t j = 0; j < expected.size(); ++j) {
    if (j >= header.size() || header[j] != expected[j]) {
      throw SchemaError("CSV header: missing column '" + expected[j] +
                        "' at position " + std::to_string(j + 1));
    }
  }
  if (header.size() > expected.size()) {
    throw SchemaError("CSV header: unexpected extra column '" +
                      std::string(header[expected.size()]) + "'");
  }

  Dataset data;
  data.p = p;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != expected.size()) {
      throw ParseError("expected " + std::to_string(expected.size()) +
                           " cells, found " + std::to_string(cells.size()),
                       row, std::min(cells.size(), expected.size()) + 1);
    }
    ObservedRecord r;
    r.q = detail::parse_double(cells[0], row, 1);
    r.x = detail::parse_double(cells[1], row, 2);
    const double delta = detail::parse_double(cells[2], row, 3);
    const double a = detail::parse_double(cells[3], row, 4);
    if (delta != 0.0 && delta != 1.0) {
      throw DomainError("delta must be 0 or 1 (row " + std::to_string(row) + ")");
    }
    if (a != 0.0 && a != 1.0) {
      throw DomainError("a must be 0 or 1 (row " + std::to_string(row) + ")");
    }
    r.delta = static_cast<int>(delta);
    r.a = static_cast<int>(a);
    r.z.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      r.z[j] = detail::parse_double(cells[4 + j], row, 5 + j);
    }
    data.records.push_back(std::move(r));
  }
  return data;
}

inline Dataset load_observed_csv(const std::string& path, std::size_t p) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open data file: " + path);
  return parse_observed_csv(in, p);
}

// Shortest round-trip representation, so load(write(D)) == D exactly.
inline void write_observed_csv(std::ostream& out, const Dataset& data) {
  const auto header = expected_header(data.p);
  for (std::size_t j = 0; j < header.size(); ++j) {
    out << (j ? "," : "") << header[j];
  }
  out << '\n';
  for (const auto& r : data.records) {
    out << detail::format_double(r.q) << ',' << detail::format_double(r.x)
        << ',' << r.delta << ',' << r.a;
    for (double v : r.z) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

inline void write_observed_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write data file: " + path);
  write_observed_csv(out, data);
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::size_t index;
  std::string rule;
  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::size_t n = 0;
  std::vector<Violation> violations;
  std::size_t ordering_failures = 0;  // records with q >= x
  double censoring_rate = 0.0;
  double treated_fraction = 0.0;

  bool ok() const { return violations.empty(); }

  nlohmann::json to_json() const {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& e : violations) v.push_back({{"index", e.index}, {"rule", e.rule}});
    return {{"n", n},
            {"violations", v},
            {"summary",
             {{"truncation_ordering_failures", ordering_failures},
              {"censoring_rate", censoring_rate},
              {"treated_fraction", treated_fraction}}}};
  }
};

namespace rules {
inline constexpr const char* kOrdering = "q<x";
inline constexpr const char* kFinite = "times_finite";
inline constexpr const char* kNonnegative = "times_nonnegative";
inline constexpr const char* kDelta = "delta\xE2\x88\x88{0,1}";
inline constexpr const char* kTreatment = "a\xE2\x88\x88{0,1}";
inline constexpr const char* kCovariates = "z_complete";
}  // namespace rules

inline ValidationReport validate(const Dataset& data) {
  ValidationReport report;
  report.n = data.size();
  std::size_t censored = 0;
  std::size_t treated = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data[i];
    const bool finite = std::isfinite(r.q) && std::isfinite(r.x);
    if (!finite) report.violations.push_back({i, rules::kFinite});
    if (r.q < 0.0 || r.x < 0.0) report.violations.push_back({i, rules::kNonnegative});
    if (!(r.q < r.x)) {
      report.violations.push_back({i, rules::kOrdering});
      ++report.ordering_failures;
    }
    if (r.delta != 0 && r.delta != 1) report.violations.push_back({i, rules::kDelta});
    if (r.a != 0 && r.a != 1) report.violations.push_back({i, rules::kTreatment});
    const bool z_ok = r.z.size() == data.p &&
                      std::all_of(r.z.begin(), r.z.end(),
                                  [](double v) { return std::isfinite(v); });
    if (!z_ok) report.violations.push_back({i, rules::kCovariates});
    censored += r.delta == 0;
    treated += r.a == 1;
  }
  if (report.n > 0) {
    report.censoring_rate = static_cast<double>(censored) / report.n;
    report.treated_fraction = static_cast<double>(treated) / report.n;
  }
  return report;
}

// Estimators call this at their boundary.
inline void require_valid(const Dataset& data) {
  const auto report = validate(data);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    throw DomainError("dataset has " + std::to_string(report.violations.size()) +
                      " validation violation(s); first: record " +
                      std::to_string(v.index) + " rule " + v.rule);
  }
  if (data.size() == 0) throw DomainError("dataset is empty");
}

// ---------------------------------------------------------------------------
// Folds

struct FoldAssignment {
  std::size_t n = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<int> labels;  // 1..k

  std::vector<std::size_t> members(int fold) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == fold) idx.push_back(i);
    }
    return idx;
  }

  std::vector<std::size_t> complement(int fold) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] != fold) idx.push_back(i);
    }
    return idx;
  }
};

// Uniform random permutation (Fisher-Yates on a counter stream), then
// round-robin labels.
inline FoldAssignment make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("fold count must be at least 2");
  if (k > n) {
    throw ArgumentError("fold count " + std::to_string(k) + " exceeds n = " +
                        std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterRng rng(derive_key(seed, {0xF01D}));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  FoldAssignment folds{n, k, seed, std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    folds.labels[perm[i]] = static_cast<int>(i % k) + 1;
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Trimming

inline double trim_probability(double p, double floor) {
  return std::max(std::clamp(p, 0.0, 1.0), floor);
}

inline void require_trim_floor(double floor) {
  if (!(floor > 0.0 && floor < 0.5)) {
    throw ArgumentError("trim floor must lie in (0, 0.5), got " +
                        detail::format_double(floor));
  }
}

}  // namespace ltrc

#endif  // LTRC_DATA_HPP
