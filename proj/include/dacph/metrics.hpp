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

/// @file metrics.hpp
/// @brief Scalar comparisons computed from run logs.
///
/// All integrals use the left rectangle rule over logged rows; a row's
/// weight is the time to the next row (the last row repeats the previous
/// spacing). Tracking and effort compare phases 2 and 3 only.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dacph/common.hpp"
#include "dacph/run_log.hpp"

namespace dacph {

struct PhaseStats {
  double duration = 0.0;
  double rms_alpha_err = 0.0;
  double effort = 0.0;  // integral of ||u||^2
  double mean_e_tau = 0.0;
  double final_chi = 0.0;
};

struct RunSummary {
  std::array<PhaseStats, 4> phases{};
  double rms_alpha_err = 0.0;  // phases 2 and 3
  double effort = 0.0;         // phases 2 and 3
  double B_error_ratio = NAN;
  double D_error_ratio = NAN;
  std::optional<double> tracking_reduction_pct;
  std::optional<double> effort_increase_pct;
};

struct MetricsWindows {
  double estimation_window = 60.0;  // s
};

namespace detail {

inline std::vector<double> row_weights(const std::vector<double>& t) {
  std::vector<double> w(t.size(), 0.0);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) w[i] = t[i + 1] - t[i];
  if (t.size() >= 2) w.back() = w[w.size() - 2];
  return w;
}

/// Start and end time of each phase present in the log.
inline std::array<std::pair<double, double>, 4> phase_spans(const std::vector<double>& t,
                                                           const std::vector<double>& phase,
                                                           const std::vector<double>& w) {
  std::array<std::pair<double, double>, 4> spans;
  spans.fill({NAN, NAN});
  for (std::size_t i = 0; i < t.size(); ++i) {
    const int p = static_cast<int>(phase[i]);
    if (p < 0 || p > 3) throw Error("metrics: phase value out of range");
    if (std::isnan(spans[p].first)) spans[p].first = t[i];
    spans[p].second = t[i] + w[i];
  }
  return spans;
}

}  // namespace detail

/// Relative L2 estimation error: ||est - true|| over the last window of
/// phase 2 divided by ||est_0 - true|| over the first window of phase 1,
/// where est_0 is the estimate logged in row 0. NaN when a window is missing.
inline std::array<double, 2> estimation_error_ratios(const RunLog& log, const MetricsWindows& win = {}) {
  std::array<double, 2> out{NAN, NAN};
  if (log.rows() == 0) return out;
  const auto t = log.column("t");
  const auto phase = log.column("phase");
  const auto w = detail::row_weights(t);
  const auto spans = detail::phase_spans(t, phase, w);
  if (std::isnan(spans[1].first) || std::isnan(spans[2].first)) return out;

  static const char* kB[] = {"B_hat11", "B_hat12", "B_hat21", "B_hat22"};
  static const char* kBt[] = {"B_true11", "B_true12", "B_true21", "B_true22"};
  static const char* kD[] = {"D_hat1", "D_hat2"};
  static const char* kDt[] = {"D_true1", "D_true2"};
  std::array<double, 4> B0{};
  std::array<double, 2> D0{};
  for (int j = 0; j < 4; ++j) B0[j] = log.at(0, log.index(kB[j]));
  for (int j = 0; j < 2; ++j) D0[j] = log.at(0, log.index(kD[j]));
  std::array<std::size_t, 4> bt{};
  std::array<std::size_t, 2> dt{};
  for (int j = 0; j < 4; ++j) bt[j] = log.index(kBt[j]);
  for (int j = 0; j < 2; ++j) dt[j] = log.index(kDt[j]);
  const std::size_t be = log.index("B_err"), de = log.index("D_err");

  const double first_end = spans[1].first + win.estimation_window;
  const double last_begin = spans[2].second - win.estimation_window;
  double nb = 0.0, nd = 0.0, db = 0.0, dd = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const int p = static_cast<int>(phase[i]);
    if (p == 1 && t[i] < first_end) {
      for (int j = 0; j < 4; ++j) db += w[i] * std::pow(B0[j] - log.at(i, bt[j]), 2);
      for (int j = 0; j < 2; ++j) dd += w[i] * std::pow(D0[j] - log.at(i, dt[j]), 2);
    }
    if (p == 2 && t[i] >= last_begin) {
      nb += w[i] * log.at(i, be) * log.at(i, be);
      nd += w[i] * log.at(i, de) * log.at(i, de);
    }
  }
  if (db > 0.0) out[0] = std::sqrt(nb / db);
  if (dd > 0.0) out[1] = std::sqrt(nd / dd);
  return out;
}

/// Per-phase statistics and the phase 2-3 aggregates of one log.
inline RunSummary summarize(const RunLog& log, const MetricsWindows& win = {}) {
  RunSummary s;
  if (log.rows() == 0) return s;
  const auto t = log.column("t");
  const auto phase = log.column("phase");
  const auto a = log.column("alpha_err");
  const auto u1 = log.column("u1"), u2 = log.column("u2");
  const auto e1 = log.column("e_tau1"), e2 = log.column("e_tau2");
  const auto chi = log.column("chi");
  const auto w = detail::row_weights(t);

  std::array<double, 4> sq{}, eff{}, et{}, dur{};
  double sq23 = 0.0, dur23 = 0.0, eff23 = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const int p = static_cast<int>(phase[i]);
    if (p < 0 || p > 3) throw Error("metrics: phase value out of range");
    const double uu = u1[i] * u1[i] + u2[i] * u2[i];
    dur[p] += w[i];
    sq[p] += w[i] * a[i] * a[i];
    eff[p] += w[i] * uu;
    et[p] += w[i] * std::hypot(e1[i], e2[i]);
    s.phases[p].final_chi = chi[i];
    if (p >= 2) {
      dur23 += w[i];
      sq23 += w[i] * a[i] * a[i];
      eff23 += w[i] * uu;
    }
  }
  for (int p = 0; p < 4; ++p) {
    auto& ps = s.phases[p];
    ps.duration = dur[p];
    ps.effort = eff[p];
    if (dur[p] > 0.0) {
      ps.rms_alpha_err = std::sqrt(sq[p] / dur[p]);
      ps.mean_e_tau = et[p] / dur[p];
    }
  }
  s.effort = eff23;
  s.rms_alpha_err = dur23 > 0.0 ? std::sqrt(sq23 / dur23) : 0.0;

  const auto ratios = estimation_error_ratios(log, win);
  s.B_error_ratio = ratios[0];
  s.D_error_ratio = ratios[1];
  return s;
}

/// RMS of a column over consecutive windows of the given phases.
inline std::vector<double> windowed_rms(const RunLog& log, std::string_view column, double window,
                                        int first_phase, int last_phase) {
  std::vector<double> out;
  if (log.rows() == 0) return out;
  const auto t = log.column("t");
  const auto phase = log.column("phase");
  const auto v = log.column(column);
  const auto w = detail::row_weights(t);
  double start = NAN, acc = 0.0, wsum = 0.0;
  long current = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const int p = static_cast<int>(phase[i]);
    if (p < first_phase || p > last_phase) continue;
    if (std::isnan(start)) start = t[i];
    const long idx = static_cast<long>(std::floor((t[i] - start) / window));
    if (idx != current) {
      if (wsum > 0.0) out.push_back(std::sqrt(acc / wsum));
      current = idx;
      acc = wsum = 0.0;
    }
    acc += w[i] * v[i] * v[i];
    wsum += w[i];
  }
  if (wsum > 0.0) out.push_back(std::sqrt(acc / wsum));
  return out;
}

/// Paired comparison. The logs must share a schema and a time base.
inline RunSummary compare(const RunLog& dac, const RunLog& baseline, const MetricsWindows& win = {}) {
  if (dac.columns() != baseline.columns()) throw Error("compare: logs have different schemas");
  if (dac.rows() != baseline.rows()) throw Error("compare: logs have different lengths");
  const std::size_t ti = dac.index("t");
  for (std::size_t r = 0; r < dac.rows(); ++r) {
    if (dac.at(r, ti) != baseline.at(r, ti)) throw Error("compare: logs have different time bases");
  }
  RunSummary s = summarize(dac, win);
  const RunSummary b = summarize(baseline, win);
  s.tracking_reduction_pct = b.rms_alpha_err > 0.0 ? 100.0 * (1.0 - s.rms_alpha_err / b.rms_alpha_err) : 0.0;
  s.effort_increase_pct = b.effort > 0.0 ? 100.0 * (s.effort / b.effort - 1.0) : 0.0;
  return s;
}

inline constexpr const char* kSummaryHeader =
    "# dacph summary v1\n"
    "# rms_alpha_err and effort aggregate phases 2 and 3; effort is the integral of ||u||^2 dt\n"
    "# estimation ratios: last 60 s of phase 2 over the initial estimate's error in the first 60 s of phase 1\n";

inline void write_summary(std::ostream& os, const RunSummary& s,
                          const std::map<std::string, std::string>& extra = {}) {
  os << kSummaryHeader;
  char buf[64];
  auto put = [&](const std::string& k, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << k << " = " << buf << '\n';
  };
  for (const auto& [k, v] : extra) os << k << " = " << v << '\n';
  for (int p = 0; p < 4; ++p) {
    const std::string pre = "phase" + std::to_string(p) + ".";
    put(pre + "duration", s.phases[p].duration);
    put(pre + "rms_alpha_err", s.phases[p].rms_alpha_err);
    put(pre + "effort", s.phases[p].effort);
    put(pre + "mean_e_tau", s.phases[p].mean_e_tau);
    put(pre + "final_chi", s.phases[p].final_chi);
  }
  put("rms_alpha_err", s.rms_alpha_err);
  put("effort", s.effort);
  put("B_error_ratio", s.B_error_ratio);
  put("D_error_ratio", s.D_error_ratio);
  if (s.tracking_reduction_pct) put("tracking_reduction_pct", *s.tracking_reduction_pct);
  if (s.effort_increase_pct) put("effort_increase_pct", *s.effort_increase_pct);
}

inline void write_summary(const std::string& path, const RunSummary& s,
                          const std::map<std::string, std::string>& extra = {}) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_summary(os, s, extra);
}

/// Parses key = value lines; '#' starts a comment line.
inline std::map<std::string, std::string> read_summary(std::istream& is) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw Error("summary line " + std::to_string(lineno) + ": expected 'key = value'");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace dacph
