// Copyright 2026 The DAC-pH Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file run_log.hpp
/// @brief Column-oriented run log with a fixed schema and its CSV form.
///
/// Values are rounded to 9 significant digits when appended, so a log read
/// back from CSV is bit-identical to the one that produced it.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dacph/common.hpp"

namespace dacph {

inline constexpr int kCsvDigits = 9;

inline double quantize(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*g", kCsvDigits, v);
  return std::strtod(buf, nullptr);
}

/// Logged columns, in CSV order.
inline const std::vector<std::string>& run_log_columns() {
  static const std::vector<std::string> cols = {
      "t",       "phase",   "events",  "q1",      "q2",      "p1",      "p2",      "r0x",
      "r0y",     "theta0",  "alpha",   "alpha_d", "alpha_err", "s1",    "s2",      "V",
      "tau_req1", "tau_req2", "tau_obs1", "tau_obs2", "e_tau1", "e_tau2", "u1",    "u2",
      "d1",      "d2",      "chi",     "c",       "k1",      "k2",      "beta",    "loss",
      "B_hat11", "B_hat12", "B_hat21", "B_hat22", "D_hat1",  "D_hat2",  "B_true11", "B_true12",
      "B_true21", "B_true22", "D_true1", "D_true2", "B_err",  "D_err",   "h_lin",   "h_ang",
      "clearance", "proj_residual"};
  return cols;
}

/// Bits of the events column; a row carries every event since the previous row.
enum EventBits : int {
  kEventSingular = 1,
  kEventGainFreeze = 2,
  kEventDissipationFloor = 4,
  kEventPhaseTransition = 8,
};

class RunLog {
 public:
  RunLog() : columns_(run_log_columns()) {}
  explicit RunLog(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t width() const { return columns_.size(); }
  std::size_t rows() const { return width() ? data_.size() / width() : 0; }
  bool empty() const { return data_.empty(); }

  void append(const std::vector<double>& row) {
    if (row.size() != width()) throw DimensionError("RunLog: row has the wrong number of columns");
    if (!empty() && !(row[0] > at(rows() - 1, 0))) throw Error("RunLog: time must increase strictly");
    for (double v : row) data_.push_back(quantize(v));
  }

  double at(std::size_t row, std::size_t col) const { return data_[row * width() + col]; }

  std::size_t index(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i] == name) return i;
    }
    throw Error("RunLog: no column named '" + std::string(name) + "'");
  }

  std::vector<double> column(std::string_view name) const {
    const std::size_t c = index(name);
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
    return out;
  }

  void write_csv(std::ostream& os) const {
    for (std::size_t i = 0; i < width(); ++i) os << (i ? "," : "") << columns_[i];
    os << '\n';
    char buf[32];
    for (std::size_t r = 0; r < rows(); ++r) {
      for (std::size_t c = 0; c < width(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.*g", kCsvDigits, at(r, c));
        if (c) os << ',';
        os << buf;
      }
      os << '\n';
    }
  }

  void write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    write_csv(os);
  }

  static RunLog read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw Error("CSV: missing header");
    std::vector<std::string> cols;
    {
      std::stringstream ss(line);
      std::string name;
      while (std::getline(ss, name, ',')) cols.push_back(name);
    }
    RunLog log(cols);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::vector<double> row;
      row.reserve(cols.size());
      std::size_t start = 0;
      while (start <= line.size()) {
        const std::size_t end = std::min(line.find(',', start), line.size());
        row.push_back(std::strtod(line.substr(start, end - start).c_str(), nullptr));
        start = end + 1;
      }
      if (row.size() != cols.size()) {
        throw Error("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(cols.size()) +
                    " fields, got " + std::to_string(row.size()));
      }
      for (double v : row) log.data_.push_back(v);
    }
    return log;
  }

  static RunLog read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open '" + path + "'");
    return read_csv(is);
  }

 private:
  std::vector<std::string> columns_;
  std::vector<double> data_;
};

}  // namespace dacph
