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


#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "dacph/metrics.hpp"

namespace dacph {
namespace {

struct Row {
  double t, phase, alpha_err, u1, u2;
  Mat2 B_hat = Mat2::Identity(), B_true = Mat2::Identity();
  Vec2 D_hat = Vec2(0.1, 0.1), D_true = Vec2(0.1, 0.1);
};

RunLog make_log(const std::vector<Row>& rows) {
  RunLog log;
  for (const auto& r : rows) {
    std::vector<double> v(log.width(), 0.0);
    auto set = [&](const char* k, double x) { v[log.index(k)] = x; };
    set("t", r.t);
    set("phase", r.phase);
    set("alpha_err", r.alpha_err);
    set("u1", r.u1);
    set("u2", r.u2);
    const char* bh[] = {"B_hat11", "B_hat12", "B_hat21", "B_hat22"};
    const char* bt[] = {"B_true11", "B_true12", "B_true21", "B_true22"};
    for (int i = 0; i < 4; ++i) {
      set(bh[i], r.B_hat(i / 2, i % 2));
      set(bt[i], r.B_true(i / 2, i % 2));
    }
    set("D_hat1", r.D_hat(0));
    set("D_hat2", r.D_hat(1));
    set("D_true1", r.D_true(0));
    set("D_true2", r.D_true(1));
    set("B_err", (r.B_hat - r.B_true).norm());
    set("D_err", (r.D_hat - r.D_true).norm());
    log.append(v);
  }
  return log;
}

// One row per second: 10 s warmup, 100 s per later phase.
std::vector<Row> scenario(double err_scale, double u_scale) {
  std::vector<Row> rows;
  for (int i = 0; i < 310; ++i) {
    const double phase = i < 10 ? 0 : 1 + (i - 10) / 100;
    rows.push_back({static_cast<double>(i), phase, err_scale * std::sin(0.1 * i), u_scale, -u_scale});
  }
  return rows;
}

TEST(Metrics, IdenticalLogsCompareEqual) {
  const auto log = make_log(scenario(1.0, 1.0));
  const auto s = compare(log, log);
  EXPECT_EQ(*s.tracking_reduction_pct, 0.0);
  EXPECT_EQ(*s.effort_increase_pct, 0.0);
}

TEST(Metrics, HalvedErrorIsFiftyPercent) {
  const auto s = compare(make_log(scenario(0.5, 2.0)), make_log(scenario(1.0, 1.0)));
  EXPECT_NEAR(*s.tracking_reduction_pct, 50.0, 1e-6);
  EXPECT_NEAR(*s.effort_increase_pct, 300.0, 1e-9);
}

TEST(Metrics, PhaseStatistics) {
  const auto s = summarize(make_log(scenario(1.0, 1.0)));
  EXPECT_EQ(s.phases[0].duration, 10.0);
  EXPECT_EQ(s.phases[3].duration, 100.0);
  EXPECT_NEAR(s.phases[2].effort, 200.0, 1e-12);
  EXPECT_NEAR(s.effort, 400.0, 1e-12);
}

// Estimates frozen at nominal against a constant true offset in phase 1;
// phase 2 ends with a constant estimation error.
TEST(Metrics, EstimationRatioOracle) {
  auto rows = scenario(1.0, 1.0);
  const Mat2 dB = (Mat2() << 0.2, -0.1, 0.3, 0.0).finished();
  const Vec2 dD(0.4, 0.2);
  for (auto& r : rows) {
    if (r.phase >= 1) {
      r.B_true = Mat2::Identity() + dB;
      r.D_true = Vec2(0.1, 0.1) + dD;
    }
    if (r.phase == 2) {
      r.B_hat = r.B_true + 0.25 * dB;
      r.D_hat = r.D_true - 0.1 * dD;
    }
  }
  const auto s = summarize(make_log(rows), MetricsWindows{30.0});
  EXPECT_NEAR(s.B_error_ratio, 0.25, 1e-6);
  EXPECT_NEAR(s.D_error_ratio, 0.1, 1e-6);
}

TEST(Metrics, MissingPhasesGiveNaN) {
  std::vector<Row> rows = {{0.0, 0, 0.1, 1, 1}, {1.0, 0, 0.1, 1, 1}};
  const auto s = summarize(make_log(rows));
  EXPECT_TRUE(std::isnan(s.B_error_ratio));
  EXPECT_TRUE(std::isnan(s.D_error_ratio));
}

TEST(Metrics, CompareRejectsMismatchedLogs) {
  const auto a = make_log(scenario(1.0, 1.0));
  auto rows = scenario(1.0, 1.0);
  rows.pop_back();
  EXPECT_THROW(compare(a, make_log(rows)), Error);
  rows = scenario(1.0, 1.0);
  rows.back().t += 0.5;
  EXPECT_THROW(compare(a, make_log(rows)), Error);
  RunLog other({"t", "phase"});
  EXPECT_THROW(compare(a, other), Error);
}

TEST(Metrics, WindowedRms) {
  std::vector<Row> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({static_cast<double>(i), 1, i < 20 ? 2.0 : 1.0, 0, 0});
  const auto w = windowed_rms(make_log(rows), "alpha_err", 20.0, 1, 2);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_DOUBLE_EQ(w[0], 2.0);
  EXPECT_DOUBLE_EQ(w[1], 1.0);
}

TEST(RunLogCsv, RoundTripIsExact) {
  const auto log = make_log(scenario(0.123456789123, 1.0 / 3.0));
  std::stringstream ss;
  log.write_csv(ss);
  const auto back = RunLog::read_csv(ss);
  ASSERT_EQ(back.columns(), log.columns());
  ASSERT_EQ(back.rows(), log.rows());
  for (std::size_t r = 0; r < log.rows(); ++r) {
    for (std::size_t c = 0; c < log.width(); ++c) ASSERT_EQ(back.at(r, c), log.at(r, c));
  }
}

TEST(RunLogCsv, Errors) {
  RunLog log;
  EXPECT_THROW(log.append({1.0}), DimensionError);
  std::vector<double> row(log.width(), 0.0);
  log.append(row);
  EXPECT_THROW(log.append(row), Error);
  std::stringstream bad("a,b\n1,2,3\n");
  EXPECT_THROW(RunLog::read_csv(bad), Error);
  EXPECT_THROW(log.index("nope"), Error);
}

TEST(Summary, RoundTrip) {
  const auto s = compare(make_log(scenario(0.5, 2.0)), make_log(scenario(1.0, 1.0)));
  std::stringstream ss;
  write_summary(ss, s, {{"status", "ok"}});
  const auto kv = read_summary(ss);
  EXPECT_EQ(kv.at("status"), "ok");
  EXPECT_EQ(std::stod(kv.at("rms_alpha_err")), s.rms_alpha_err);
  EXPECT_EQ(std::stod(kv.at("tracking_reduction_pct")), *s.tracking_reduction_pct);
  EXPECT_EQ(std::stod(kv.at("phase2.effort")), s.phases[2].effort);
  std::stringstream bad("no equals sign\n");
  EXPECT_THROW(read_summary(bad), Error);
}

}  // namespace
}  // namespace dacph
