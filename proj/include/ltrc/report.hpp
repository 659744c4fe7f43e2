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

// Benchmark artifacts: per-replication CSV, JSON summary, markdown table.
// Every artifact embeds or accompanies the config echo.

#ifndef LTRC_REPORT_HPP
#define LTRC_REPORT_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltrc/bench.hpp"
#include "ltrc/data.hpp"
#include "ltrc/error.hpp"

namespace ltrc {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// `{scenario}_{method}_{n}_{reps}_{seed}`; multi-size runs join sizes with '-'.
inline std::string artifact_stem(const BenchmarkResult& r, const std::string& method) {
  std::vector<std::size_t> sizes;
  for (const auto& c : r.cells) {
    if (std::find(sizes.begin(), sizes.end(), c.n) == sizes.end()) sizes.push_back(c.n);
  }
  std::string n;
  for (std::size_t s : sizes) n += (n.empty() ? "" : "-") + std::to_string(s);
  return r.scenario + "_" + method + "_" + n + "_" + std::to_string(r.reps) + "_" +
         std::to_string(r.seed);
}

inline nlohmann::json summary_json(const BenchmarkResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    const CellSummary s = r.summary(c);
    nlohmann::json j{{"method", c.method}, {"label", c.label}, {"n", c.n},
                     {"ok", s.ok},         {"failed", s.failed}};
    if (r.kind == BenchmarkResult::Kind::kAte) {
      j["bias"] = s.bias;
      j["sd"] = s.sd;
      j["mean_se"] = s.mean_se;
      j["cp"] = s.cp;
      if (s.mean_boot_se) {
        j["mean_boot_se"] = *s.mean_boot_se;
        j["boot_cp"] = *s.boot_cp;
      }
    } else {
      j["median_mse"] = s.median;
      j["mean_mse"] = s.mean;
      j["q25_mse"] = s.q25;
      j["q75_mse"] = s.q75;
    }
    cells.push_back(j);
  }
  nlohmann::json out{{"kind", r.kind == BenchmarkResult::Kind::kAte ? "ate" : "cate"},
                     {"scenario", r.scenario},
                     {"reps", r.reps},
                     {"seed", r.seed},
                     {"config", r.config},
                     {"cells", cells}};
  if (r.kind == BenchmarkResult::Kind::kAte) out["truth"] = r.truth;
  return out;
}

inline void write_replications_csv(std::ostream& out, const BenchmarkResult& r) {
  out << "method,label,n,rep,seed,value,se,se_boot,error\n";
  for (const auto& c : r.cells) {
    for (const auto& p : c.reps) {
      out << c.method << ',' << c.label << ',' << c.n << ',' << p.index << ',' << p.seed << ',';
      if (p.ok()) {
        out << detail::format_double(p.value) << ',';
        if (!std::isnan(p.se)) out << detail::format_double(p.se);
        out << ',';
        if (p.se_boot) out << detail::format_double(*p.se_boot);
        out << ",\n";
      } else {
        std::string e = p.error;
        for (char& ch : e) {
          if (ch == ',' || ch == '\n') ch = ';';
        }
        out << ",,," << e << '\n';
      }
    }
  }
}

// Inverse of write_replications_csv; the result has no config or truth.
inline BenchmarkResult read_replications_csv(std::istream& in, BenchmarkResult::Kind kind) {
  BenchmarkResult r;
  r.kind = kind;
  std::string line;
  if (!std::getline(in, line) || line.rfind("method,label,n,rep", 0) != 0) {
    throw SchemaError("replication CSV: bad header");
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 9) throw ParseError("expected 9 cells", row, cells.size());
    const std::string method(cells[0]), label(cells[1]);
    const auto n = static_cast<std::size_t>(detail::parse_double(cells[2], row, 3));
    Cell* cell = nullptr;
    for (auto& c : r.cells) {
      if (c.method == method && c.label == label && c.n == n) cell = &c;
    }
    if (!cell) {
      r.cells.push_back({method, label, n, {}});
      cell = &r.cells.back();
    }
    Replicate p;
    p.index = static_cast<std::size_t>(detail::parse_double(cells[3], row, 4));
    p.seed = std::stoull(std::string(cells[4]));
    p.error = std::string(cells[8]);
    if (p.ok()) {
      p.value = detail::parse_double(cells[5], row, 6);
      if (!cells[6].empty()) p.se = detail::parse_double(cells[6], row, 7);
      if (!cells[7].empty()) p.se_boot = detail::parse_double(cells[7], row, 8);
    }
    cell->reps.push_back(std::move(p));
  }
  for (const auto& c : r.cells) r.reps = std::max(r.reps, c.reps.size());
  return r;
}

// ATE: the table layout (bias, SD, SE/bootSE, CP/bootCP); CATE: MSE quartiles.
inline void write_markdown(std::ostream& out, const BenchmarkResult& r) {
  if (r.kind == BenchmarkResult::Kind::kAte) {
    out << "| Methods | F/pi-G-S_D | bias | SD | SE/bootSE | CP/bootCP |\n"
        << "|---|---|---:|---:|---:|---:|\n";
    std::string last;
    for (const auto& c : r.cells) {
      const CellSummary s = r.summary(c);
      const std::string m = c.method == last ? "" : c.method;
      last = c.method;
      std::string se = fixed(s.mean_se, 4), cp = fixed(s.cp, 3);
      if (s.mean_boot_se) {
        se += "/" + fixed(*s.mean_boot_se, 4);
        cp += "/" + fixed(*s.boot_cp, 3);
      }
      out << "| " << m << " | " << c.label << " | " << fixed(s.bias, 4) << " | "
          << fixed(s.sd, 4) << " | " << se << " | " << cp << " |\n";
    }
    return;
  }
  out << "| learner | n | median MSE | Q1 | Q3 | mean MSE | failed |\n"
      << "|---|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& c : r.cells) {
    const CellSummary s = r.summary(c);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "| %s | %zu | %.3e | %.3e | %.3e | %.3e | %zu |\n",
                  c.method.c_str(), c.n, s.median, s.q25, s.q75, s.mean, s.failed);
    out << buf;
  }
}

struct ReportPaths {
  std::string csv, json, markdown;
};

inline ReportPaths emit_report(const BenchmarkResult& r, const std::string& dir,
                               const std::string& method) {
  if (r.cells.empty()) throw ArgumentError("emit_report: no results");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string stem = (std::filesystem::path(dir) / artifact_stem(r, method)).string();
  ReportPaths p{stem + ".csv", stem + ".json", stem + ".md"};
  auto open = [](const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    return f;
  };
  {
    auto f = open(p.csv);
    write_replications_csv(f, r);
  }
  {
    auto f = open(p.json);
    f << summary_json(r).dump(2) << '\n';
  }
  {
    auto f = open(p.markdown);
    write_markdown(f, r);
    f << "\nconfig: `" << r.config.dump() << "`\n";
  }
  return p;
}

}  // namespace ltrc

#endif  // LTRC_REPORT_HPP
