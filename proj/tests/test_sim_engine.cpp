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


#include <gtest/gtest.h>

#include "dacph/sim_engine.hpp"
#include "dacph/verify.hpp"

namespace dacph {
namespace {

TEST(Scenario, PhaseSchedule) {
  ScenarioConfig cfg;
  cfg.warmup = 2.0;
  cfg.phase_durations = {1.0, 0.5, 3.0};
  EXPECT_EQ(cfg.total_steps(), 6500);
  EXPECT_EQ(cfg.phase_at_step(0), Phase::Warmup);
  EXPECT_EQ(cfg.phase_at_step(1999), Phase::Warmup);
  EXPECT_EQ(cfg.phase_at_step(2000), Phase::LinearUncertainty);
  EXPECT_EQ(cfg.phase_at_step(3000), Phase::NonlinearUncertainty);
  EXPECT_EQ(cfg.phase_at_step(3500), Phase::Disturbed);
  EXPECT_EQ(cfg.phase_at_step(6500), Phase::Disturbed);
}

TEST(Scenario, ZeroLengthPhasesAreSkipped) {
  ScenarioConfig cfg;
  cfg.warmup = 1.0;
  cfg.phase_durations = {0.0, 0.0, 2.0};
  EXPECT_EQ(cfg.phase_at_step(999), Phase::Warmup);
  EXPECT_EQ(cfg.phase_at_step(1000), Phase::Disturbed);
}

TEST(Scenario, ValidationErrors) {
  auto expect_invalid = [](auto mutate) {
    ScenarioConfig cfg;
    mutate(cfg);
    EXPECT_THROW(cfg.validate(), ConfigError);
  };
  expect_invalid([](ScenarioConfig& c) { c.rates.lhs_hz = 300.0; });
  expect_invalid([](ScenarioConfig& c) { c.rates.learn_hz = 0.0; });
  expect_invalid([](ScenarioConfig& c) { c.initial.system_momentum = Vec3(0.0, 0.0, 1e-3); });
  expect_invalid([](ScenarioConfig& c) { c.warmup = -1.0; });
  expect_invalid([](ScenarioConfig& c) { c.phase_durations[1] = -1.0; });
  expect_invalid([](ScenarioConfig& c) { c.rates.log_every = 0; });
  expect_invalid([](ScenarioConfig& c) { c.learner.buffer_size = 8; });
  expect_invalid([](ScenarioConfig& c) { c.rhs.gains.safety = 0.9; });
  expect_invalid([](ScenarioConfig& c) { c.robot.bodies[2].inertia = 0.0; });
  EXPECT_NO_THROW(ScenarioConfig{}.validate());
}

TEST(Rk4, ConstantForceFromRestConservesMomentum) {
  const auto P = reference_robot();
  SystemState<2> x;
  x.q = Vec2(0.5, -0.8);
  auto port = [](const SystemState<2>&, const StageEval<2>&) -> Vec2 { return Vec2(0.01, -0.02); };
  for (int k = 0; k < 1000; ++k) {
    x = rk4_step<2>(x, 1e-3, P, port);
    const auto ev = evaluate_stage<2>(x, P);
    const auto h = system_momentum<2>(x.q, ev.dyn.qd, x.theta0, ev.kb.base_map * ev.dyn.qd, P);
    ASSERT_LT(h.linear.norm() / P.total_mass(), 1e-12);
    ASSERT_LT(std::abs(h.angular) / P.total_inertia(), 1e-12);
  }
  EXPECT_NEAR(x.t, 1.0, 1e-12);
}

TEST(Simulator, ShortScenarioRunsAndLogs) {
  const auto cfg = verify::short_scenario();
  const auto r = run(cfg);
  ASSERT_EQ(r.status, RunStatus::Ok) << r.message;
  EXPECT_EQ(r.log.rows(), static_cast<std::size_t>(cfg.total_steps() / cfg.rates.log_every + 1));
  EXPECT_LT(r.extremes.max_h_lin, 1e-8);
  EXPECT_LT(r.extremes.max_h_ang, 1e-8);
  EXPECT_GT(r.extremes.min_D_hat, 0.0);
  EXPECT_EQ(r.extremes.freeze_events, 0);
  ASSERT_TRUE(r.gains.has_value());
  EXPECT_GT(r.gains->c, 0.0);

  const auto events = r.log.column("events");
  const auto phase = r.log.column("phase");
  int transitions = 0;
  for (std::size_t i = 1; i < events.size(); ++i) {
    const bool changed = phase[i] != phase[i - 1];
    EXPECT_EQ(changed, (static_cast<int>(events[i]) & kEventPhaseTransition) != 0) << i;
    transitions += changed;
  }
  EXPECT_EQ(transitions, 3);
}

TEST(Simulator, RunsAreDeterministic) {
  const auto cfg = verify::short_scenario();
  EXPECT_EQ(verify::csv_text(run(cfg).log), verify::csv_text(run(cfg).log));
}

TEST(Simulator, BaselineAppliesRequestDirectly) {
  auto cfg = verify::short_scenario();
  cfg.mode = ControlMode::Baseline;
  const auto r = run(cfg);
  ASSERT_EQ(r.status, RunStatus::Ok);
  const auto u1 = r.log.column("u1"), tr1 = r.log.column("tau_req1");
  for (std::size_t i = 0; i < u1.size(); ++i) ASSERT_EQ(u1[i], tr1[i]);
  EXPECT_FALSE(r.gains.has_value());
  for (double l : r.log.column("loss")) ASSERT_EQ(l, 0.0);
}

TEST(Simulator, ZeroDuration) {
  ScenarioConfig cfg;
  cfg.warmup = 0.0;
  cfg.phase_durations = {0.0, 0.0, 0.0};
  const auto r = run(cfg);
  EXPECT_EQ(r.status, RunStatus::Ok);
  EXPECT_EQ(r.log.rows(), 1u);
}

TEST(Simulator, PersistentFreezeTimesOut) {
  const auto r = run(verify::persistent_freeze_scenario());
  EXPECT_EQ(r.status, RunStatus::GainFreezeTimeout);
  EXPECT_GT(r.extremes.freeze_events, 10);
}

}  // namespace
}  // namespace dacph
