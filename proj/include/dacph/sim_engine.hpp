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

/// @file sim_engine.hpp
/// @brief Closed-loop multi-rate simulation of the two-link robot: RK4 plant
/// with zero-order-hold input, outer sliding-mode loop, learner, gain
/// synthesis and the decentralized inner loop.
///
/// Per plant step the order is fixed:
///   measure -> LHS (if due) -> learner (if due) -> gains (if due)
///   -> inner loop -> integrate -> advance.

#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "dacph/dynamics.hpp"
#include "dacph/learner.hpp"
#include "dacph/lhs_control.hpp"
#include "dacph/ph_core.hpp"
#include "dacph/rhs_control.hpp"
#include "dacph/run_log.hpp"
#include "dacph/truth_plant.hpp"

namespace dacph {

/// Kinematics and dynamics evaluated once per integrator stage.
template <int N>
struct StageEval {
  KinematicsBundle<N> kb;
  DynamicsMatrices<N> dyn;
};

template <int N>
StageEval<N> evaluate_stage(const SystemState<N>& x, const RobotParams<N>& params) {
  StageEval<N> ev;
  ev.kb = generalized_jacobian<N>(x.q, x.theta0, params);
  ev.dyn.M = mass_matrix<N>(ev.kb, params);
  ev.dyn.dMdq = mass_matrix_derivatives<N>(x.q, params);
  ev.dyn.qd = ev.dyn.M.llt().solve(x.p);
  ev.dyn.C = coriolis_matrix<N>(ev.dyn.qd, ev.dyn.dMdq);
  return ev;
}

/// dH/dt = q_dot^T tau with q_dot = M^-1 p.
template <int N>
double power_balance(const SystemState<N>& x, const PortVariables& port, const RobotParams<N>& params) {
  if (port.tau.size() != N) throw DimensionError("power_balance: port size mismatch");
  const Vec<N> qd = mass_matrix<N>(x.q, x.theta0, params).llt().solve(x.p);
  return qd.dot(port.tau);
}

template <int N>
struct StateRate {
  Vec<N> q = Vec<N>::Zero();
  Vec<N> p = Vec<N>::Zero();
  Vec3 base = Vec3::Zero();  // r0_dot (2) and theta0_dot
};

/// One classical RK4 step. port(stage_state, stage_eval) returns the
/// generalized force at that stage; it is called for all four stages.
/// first, if given, must be the evaluation at x itself.
template <int N, typename PortFn>
SystemState<N> rk4_step(const SystemState<N>& x, double dt, const RobotParams<N>& params, PortFn&& port,
                         const StageEval<N>* first = nullptr) {
  auto rate = [&](const SystemState<N>& s, const StageEval<N>* pre) {
    const StageEval<N> ev = pre ? *pre : evaluate_stage<N>(s, params);
    StateRate<N> r;
    r.q = ev.dyn.qd;
    r.p = -dH_dq<N>(ev.dyn.qd, ev.dyn.dMdq) + port(s, ev);
    r.base = ev.kb.base_map * ev.dyn.qd;
    return r;
  };
  auto advance = [&](const StateRate<N>& r, double h) {
    SystemState<N> s = x;
    s.q += h * r.q;
    s.p += h * r.p;
    s.r0 += h * r.base.template head<2>();
    s.theta0 += h * r.base(2);
    s.t += h;
    return s;
  };
  const StateRate<N> k1 = rate(x, first);
  const StateRate<N> k2 = rate(advance(k1, 0.5 * dt), nullptr);
  const StateRate<N> k3 = rate(advance(k2, 0.5 * dt), nullptr);
  const StateRate<N> k4 = rate(advance(k3, dt), nullptr);
  SystemState<N> out = x;
  out.q += dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
  out.p += dt / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
  const Vec3 b = dt / 6.0 * (k1.base + 2.0 * k2.base + 2.0 * k3.base + k4.base);
  out.r0 += b.template head<2>();
  out.theta0 += b(2);
  out.t = x.t + dt;
  if (!out.q.allFinite() || !out.p.allFinite() || !out.r0.allFinite() || !std::isfinite(out.theta0)) {
    throw NumericAbort("non-finite state after integration step at t = " + std::to_string(x.t));
  }
  return out;
}

enum class ControlMode { DAC, Baseline };

inline std::string_view mode_name(ControlMode m) { return m == ControlMode::DAC ? "dac" : "baseline"; }

struct Rates {
  double plant_hz = 1000.0;
  double lhs_hz = 1000.0;
  double learn_hz = 100.0;
  double gain_hz = 1.0;
  int log_every = 50;  // plant steps per log row

  double dt() const { return 1.0 / plant_hz; }
  int divisor(double hz, const char* name) const {
    const double ratio = plant_hz / hz;
    const long r = std::lround(ratio);
    if (!(hz > 0.0) || r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9 * ratio) {
      throw ConfigError(std::string(name) + " must divide the plant rate");
    }
    return static_cast<int>(r);
  }
};

struct InitialCondition {
  Vec2 q = Vec2(0.5, -0.8);
  Vec2 p = Vec2::Zero();
  Vec2 r0 = Vec2::Zero();
  double theta0 = 0.0;
  Vec3 system_momentum = Vec3::Zero();  // (h_x, h_y, h_A); only zero is supported
};

struct RhsConfig {
  GainSettings gains{};
  ChiSettings chi{};
  double observer_cutoff_hz = 250.0;
  double gain_slew_tau = 2.0;   // s
  double freeze_timeout = 10.0; // s
  IntegratorKind integrator = IntegratorKind::Euler;
};

struct ScenarioConfig {
  ControlMode mode = ControlMode::DAC;
  std::uint64_t seed = 7;
  double warmup = 120.0;
  std::array<double, 3> phase_durations{480.0, 480.0, 480.0};
  Rates rates{};
  InitialCondition initial{};
  RobotParams<2> robot = reference_robot();
  LhsConfig<2> lhs{};
  RhsConfig rhs{};
  UncertaintyModel truth{};
  LearnerConfig learner{};
  bool learner_disturbance_feedthrough = true;
  int eigen_grid = 100;
  double metrics_window = 60.0;

  double duration() const { return warmup + phase_durations[0] + phase_durations[1] + phase_durations[2]; }

  /// Step indices at which phases 1, 2 and 3 begin.
  std::array<long, 3> phase_starts() const {
    const double dt = rates.dt();
    std::array<long, 3> s{};
    double acc = warmup;
    for (int i = 0; i < 3; ++i) {
      s[i] = std::lround(acc / dt);
      acc += phase_durations[i];
    }
    return s;
  }

  long total_steps() const { return std::lround(duration() / rates.dt()); }

  Phase phase_at_step(long k) const {
    const auto s = phase_starts();
    if (k < s[0]) return Phase::Warmup;
    if (k < s[1]) return Phase::LinearUncertainty;
    if (k < s[2]) return Phase::NonlinearUncertainty;
    return Phase::Disturbed;
  }

  void validate() const {
    robot.validate();
    lhs.gains.validate();
    lhs.apf.validate();
    if (!initial.system_momentum.isZero(0.0)) {
      throw ConfigError("initial.system_momentum: the reduced dynamics require a system at rest");
    }
    if (!(warmup >= 0.0)) throw ConfigError("warmup must be non-negative");
    for (double d : phase_durations) {
      if (!(d >= 0.0)) throw ConfigError("phase durations must be non-negative");
    }
    if (!(rates.plant_hz > 0.0)) throw ConfigError("plant rate must be positive");
    rates.divisor(rates.lhs_hz, "lhs rate");
    rates.divisor(rates.learn_hz, "learn rate");
    rates.divisor(rates.gain_hz, "gain rate");
    if (rates.log_every < 1) throw ConfigError("log_every must be at least 1");
    if (!(lhs.nu_dot_filter_tau > 0.0)) throw ConfigError("nu_dot filter time constant must be positive");
    if (!(rhs.gains.Td > 0.0) || !(rhs.gains.safety >= 1.0)) throw ConfigError("Td must be positive and safety >= 1");
    if (!(rhs.chi.window > 0.0) || !(rhs.chi.decay > 0.0 && rhs.chi.decay <= 1.0) || !(rhs.chi.floor > 0.0)) {
      throw ConfigError("chi window, decay in (0, 1] and floor must be positive");
    }
    if (!(rhs.observer_cutoff_hz > 0.0) || !(rhs.gain_slew_tau > 0.0) || !(rhs.freeze_timeout > 0.0)) {
      throw ConfigError("observer cutoff, gain slew and freeze timeout must be positive");
    }
    if (learner.batch_size < 1 || learner.buffer_size < learner.batch_size) {
      throw ConfigError("learner buffer must hold at least one batch");
    }
    if (!(learner.adam.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(learner.initial_D.array() > 0.0).all()) throw ConfigError("initial D must be positive");
    if (eigen_grid < 2) throw ConfigError("eigen grid needs at least 2 points per axis");
    if (!(metrics_window > 0.0)) throw ConfigError("metrics window must be positive");
  }
};

enum class RunStatus { Ok = 0, NumericAbort = 3, GainFreezeTimeout = 4 };

inline std::string_view status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::NumericAbort: return "numeric_abort";
    case RunStatus::GainFreezeTimeout: return "gain_freeze_timeout";
  }
  return "unknown";
}

/// Extremes over every plant step, not only logged rows.
struct StepExtremes {
  double max_h_lin = 0.0;         // ||h_L|| / (total mass * 1 m/s)
  double max_h_ang = 0.0;         // |h_A| / (total inertia * 1 rad/s)
  double min_clearance = std::numeric_limits<double>::infinity();
  double max_projector_residual = 0.0;
  double min_D_hat = std::numeric_limits<double>::infinity();
  double max_loop_radius = 0.0;
  long singular_steps = 0;
  long freeze_events = 0;
  long floor_steps = 0;
  long steps = 0;
};

struct RunResult {
  RunStatus status = RunStatus::Ok;
  std::string message;
  RunLog log;
  StepExtremes extremes;
  EigenBounds mass_bounds;
  std::optional<GainSynthesis<2>> gains;
  SystemState<2> final_state;
  double wall_seconds = 0.0;
};

class Simulator {
 public:
  explicit Simulator(const ScenarioConfig& config)
      : cfg_(config), learner_(2, learner_config(config)) {
    cfg_.validate();
  }

  const ScenarioConfig& config() const { return cfg_; }
  const OnlineLearner& learner() const { return learner_; }

  RunResult run() {
    const auto wall0 = std::chrono::steady_clock::now();
    RunResult res;
    const auto& P = cfg_.robot;
    const double dt = cfg_.rates.dt();
    const int lhs_every = cfg_.rates.divisor(cfg_.rates.lhs_hz, "lhs rate");
    const int learn_every = cfg_.rates.divisor(cfg_.rates.learn_hz, "learn rate");
    const int gain_every = cfg_.rates.divisor(cfg_.rates.gain_hz, "gain rate");
    const bool dac = cfg_.mode == ControlMode::DAC;
    const long n_steps = cfg_.total_steps();

    res.mass_bounds = mass_eigen_bounds<2>(P, cfg_.eigen_grid);
    LhsController<2> lhs(cfg_.lhs, P, dt * lhs_every);
    PortObserver<2> observer(P, dt, cfg_.rhs.observer_cutoff_hz);
    DecentralizedIntegrator<2> integrator(cfg_.rhs.integrator);
    ChiEstimator chi_est(cfg_.rhs.chi, dt);
    GainSettings gain_settings = cfg_.rhs.gains;
    gain_settings.observer_alpha = observer.filter_coefficient();
    const double slew = 1.0 - std::exp(-dt / cfg_.rhs.gain_slew_tau);

    SystemState<2> x;
    x.q = cfg_.initial.q;
    x.p = cfg_.initial.p;
    x.r0 = cfg_.initial.r0;
    x.theta0 = cfg_.initial.theta0;
    x.t = 0.0;

    Vec2 tau_req = Vec2::Zero(), u_prev = Vec2::Zero(), k_live = Vec2::Zero(), k_target = Vec2::Zero();
    Vec2 p_prev = x.p;
    Vec2 d_prev = Vec2::Zero();  // mean disturbance over the last interval
    double chi = dac ? cfg_.rhs.chi.floor : 0.0;
    double beta = 1.0;
    bool have_gains = false;
    double freeze_start = -1.0;
    bool learner_halted = false;
    LhsCommand<2> cmd;
    int pending_events = 0;
    Phase prev_phase = Phase::Warmup;
    auto& ex = res.extremes;

    try {
      for (long k = 0; k <= n_steps; ++k) {
        x.t = static_cast<double>(k) * dt;
        const Phase phase = cfg_.phase_at_step(k);
        if (k > 0 && phase != prev_phase) pending_events |= kEventPhaseTransition;
        prev_phase = phase;

        // Measure.
        const StageEval<2> ev = evaluate_stage<2>(x, P);
        const bool observed = observer.update(x.q, ev.dyn.qd);
        const Vec2 tau_obs = observer.ready() ? observer.tau() : Vec2::Zero();
        const TrueMatrices tm = true_matrices(x.q, x.p, phase, cfg_.truth);
        if (tm.dissipation_floored) {
          pending_events |= kEventDissipationFloor;
          ++ex.floor_steps;
        }
        const MomentumResidual h = system_momentum<2>(x.q, ev.dyn.qd, x.theta0, ev.kb.base_map * ev.dyn.qd, P);
        ex.max_h_lin = std::max(ex.max_h_lin, h.linear.norm() / P.total_mass());
        ex.max_h_ang = std::max(ex.max_h_ang, std::abs(h.angular) / P.total_inertia());
        const double clearance = min_clearance<2>(x.q, P, cfg_.lhs.apf);
        ex.min_clearance = std::min(ex.min_clearance, clearance);

        // Outer loop.
        if (k % lhs_every == 0) {
          if (dac) chi = chi_est.update(dt * lhs_every);
          cmd = lhs.step(x, ev.kb, ev.dyn, chi);
          tau_req = cmd.tau_req;
          if (cmd.singular) {
            pending_events |= kEventSingular;
            ++ex.singular_steps;
          }
          ex.max_projector_residual = std::max(ex.max_projector_residual, cmd.projector_residual);
        }

        // Learner.
        if (dac && observed && !learner_halted && k % learn_every == 0) {
          const Vec2 p_mid = 0.5 * (x.p + p_prev);
          ReplaySample sample{learner_.features()(observer.midpoint_q(), p_mid), u_prev, observer.midpoint_qd(),
                              observer.raw(), x.t - 0.5 * dt};
          if (cfg_.learner_disturbance_feedthrough) sample.offset = d_prev;
          learner_.record(std::move(sample));
          try {
            learner_.update();
          } catch (const NumericAbort&) {
            learner_halted = true;
          }
        }

        // Gain synthesis.
        if (dac && k % gain_every == 0) {
          try {
            if (learner_halted) throw GainFreeze("learner halted");
            const Estimate est = learner_.estimate(x.q, x.p);
            const Mat2 B_hat = est.B;
            const Vec2 D_hat = est.D;
            const Mat<2, 4> J0 = compute_J0<2>(learner_, x.q, x.p, u_prev, ev.dyn.qd);
            beta = res.gains ? mode_analysis<2>(*res.gains, B_hat, D_hat, J0, gain_settings).beta : 1.0;
            auto gs = synthesize_gains<2>(B_hat, D_hat, J0, cfg_.lhs.gains.Kd, res.mass_bounds.min, beta, dt,
                                          gain_settings);
            k_target = gs.k;
            if (!have_gains) k_live = k_target;
            have_gains = true;
            ex.max_loop_radius = std::max(ex.max_loop_radius, gs.loop_radius);
            res.gains = gs;
            freeze_start = -1.0;
          } catch (const GainFreeze& e) {
            pending_events |= kEventGainFreeze;
            ++ex.freeze_events;
            if (freeze_start < 0.0) freeze_start = x.t;
            if (x.t - freeze_start > cfg_.rhs.freeze_timeout) {
              res.status = RunStatus::GainFreezeTimeout;
              res.message = std::string("gain freeze persisted beyond timeout: ") + e.what();
            }
          }
          if (res.status != RunStatus::Ok) break;
        }

        // Inner loop.
        Vec2 e_tau = observer.ready() ? Vec2(tau_req - tau_obs) : Vec2::Zero();
        Vec2 u;
        if (dac) {
          // A frozen loop does not regulate e_tau; feeding it back through chi would grow tau_r.
          if (have_gains && freeze_start < 0.0) chi_est.push(e_tau.norm());
          k_live += slew * (k_target - k_live);
          u = integrator.step(e_tau, k_live, dt);
        } else {
          u = tau_req;
          integrator.set(u);
        }

        const Vec2 d = disturbance(x.t, phase, cfg_.truth.disturbance);
        if (k % cfg_.rates.log_every == 0) {
          const Estimate est = learner_halted ? Estimate{Mat2::Constant(NAN), Vec2::Constant(NAN)}
                                              : learner_.estimate(x.q, x.p);
          ex.min_D_hat = std::min(ex.min_D_hat, est.D.minCoeff());
          const auto& s = cmd.sliding;
          const Mat2 Bh = est.B;
          const Vec2 Dh = est.D;
          res.log.append({x.t, static_cast<double>(static_cast<int>(phase)), static_cast<double>(pending_events),
                          x.q(0), x.q(1), x.p(0), x.p(1), x.r0(0), x.r0(1), x.theta0,
                          s.alpha, s.alpha_d, s.alpha_err, s.s(0), s.s(1), s.V,
                          tau_req(0), tau_req(1), tau_obs(0), tau_obs(1), e_tau(0), e_tau(1), u(0), u(1),
                          d(0), d(1), chi, res.gains && dac ? res.gains->c : 0.0, k_live(0), k_live(1), beta,
                          learner_.last_loss(),
                          Bh(0, 0), Bh(0, 1), Bh(1, 0), Bh(1, 1), Dh(0), Dh(1),
                          tm.B(0, 0), tm.B(0, 1), tm.B(1, 0), tm.B(1, 1), tm.D(0, 0), tm.D(1, 1),
                          (Bh - tm.B).norm(), (Dh - tm.D.diagonal()).norm(),
                          h.linear.norm() / P.total_mass(), std::abs(h.angular) / P.total_inertia(),
                          clearance, cmd.projector_residual});
          pending_events = 0;
        }
        ++ex.steps;
        if (k == n_steps) break;

        // Integrate with u held.
        auto port = [&](const SystemState<2>& s, const StageEval<2>& se) -> Vec2 {
          const TrueMatrices m = true_matrices(s.q, s.p, phase, cfg_.truth);
          return realized_port(u, se.dyn.qd, m, disturbance(s.t, phase, cfg_.truth.disturbance));
        };
        p_prev = x.p;
        d_prev = 0.5 * (d + disturbance(x.t + dt, phase, cfg_.truth.disturbance));
        x = rk4_step<2>(x, dt, P, port, &ev);
        u_prev = u;
      }
    } catch (const NumericAbort& e) {
      res.status = RunStatus::NumericAbort;
      res.message = e.what();
    }
    res.final_state = x;
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return res;
  }

 private:
  static LearnerConfig learner_config(const ScenarioConfig& c) {
    LearnerConfig lc = c.learner;
    lc.seed = c.seed;
    if (c.mode == ControlMode::Baseline) lc.enabled = false;
    return lc;
  }

  ScenarioConfig cfg_;
  OnlineLearner learner_;
};

inline RunResult run(const ScenarioConfig& config) { return Simulator(config).run(); }

}  // namespace dacph
