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

/// @file lhs_control.hpp
/// @brief Outer loop on the conservative dynamics: end-effector attitude
/// tracking by sliding-mode control, with collision and joint-limit
/// avoidance injected through the null space of the task row.
///
///   nu    = D^+ (alpha_d_dot - Lambda alpha_err) + (I - D^+ D) xi
///   xi    = -eta grad U(q)
///   s     = q_dot - nu
///   tau_r = M nu_dot + C' nu - Kd s - chi tanh(s / epsilon)

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "dacph/common.hpp"
#include "dacph/dynamics.hpp"

namespace dacph {

enum class RobustTerm { Tanh, Sign };

template <int N>
struct LhsGains {
  Mat<N, N> Kd = 0.5 * Mat<N, N>::Identity();
  double Lambda = 1.0;   // 1/s
  double eta = 0.1;      // APF gain
  double epsilon = 0.2;  // boundary layer width
  RobustTerm robust_term = RobustTerm::Tanh;

  void validate() const {
    if (!Kd.isApprox(Kd.transpose(), 1e-12)) throw ConfigError("lhs.Kd: must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat<N, N>> es(Kd, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues()(0) > 0.0)) throw ConfigError("lhs.Kd: must be positive definite");
    if (!(Lambda > 0.0)) throw ConfigError("lhs.Lambda: must be positive");
    if (!(eta >= 0.0)) throw ConfigError("lhs.eta: must be non-negative");
    if (!(epsilon > 0.0)) throw ConfigError("lhs.epsilon: must be positive");
  }
};

/// Repulsive potential around the base (a disc centred on the base COM)
/// plus quadratic walls near the joint limits.
template <int N>
struct ApfConfig {
  double obstacle_radius = 0.18;  // m
  double influence_dist = 0.30;   // m from the base centre; repulsion acts inside
  Vec<N> q_min = Vec<N>::Constant(-2.6);
  Vec<N> q_max = Vec<N>::Constant(2.6);
  double limit_margin = 0.2;  // rad
  double weight_obstacle = 0.02;
  double weight_limits = 0.5;
  double rho_floor = 1e-3;  // m
  double gradient_step = 1e-6;

  void validate() const {
    if (!(obstacle_radius > 0.0)) throw ConfigError("lhs.apf.obstacle_radius: must be positive");
    if (!(influence_dist > obstacle_radius)) {
      throw ConfigError("lhs.apf.influence_dist: must exceed obstacle_radius");
    }
    if (!((q_max - q_min).minCoeff() > 2.0 * limit_margin)) {
      throw ConfigError("lhs.apf.joint_limits: intervals must be wider than twice the margin");
    }
  }
};

/// Points checked against the base disc: link centres of mass, distal
/// joints and the end effector. The mount joint belongs to the base and is
/// excluded.
template <int N>
std::vector<Vec2> link_sample_points(const ChainGeometry<N>& g) {
  std::vector<Vec2> pts;
  pts.reserve(2 * N + 1);
  for (int i = 1; i <= N; ++i) pts.push_back(g.com[i]);
  for (int i = 1; i < N; ++i) pts.push_back(g.joint[i]);
  pts.push_back(g.tip);
  return pts;
}

/// min over sample points of (distance to base centre - obstacle radius).
template <int N>
double min_clearance(const Vec<N>& q, const RobotParams<N>& params, const ApfConfig<N>& cfg) {
  const auto g = chain_geometry<N>(q, 0.0, params);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pt : link_sample_points<N>(g)) best = std::min(best, pt.norm() - cfg.obstacle_radius);
  return best;
}

/// U(q) = U_obs + U_lim. Distances are measured relative to the base COM,
/// so U does not depend on the base pose.
template <int N>
double apf_potential(const Vec<N>& q, const RobotParams<N>& params, const ApfConfig<N>& cfg) {
  const auto g = chain_geometry<N>(q, 0.0, params);
  const double rho0 = cfg.influence_dist - cfg.obstacle_radius;
  double u = 0.0;
  for (const auto& pt : link_sample_points<N>(g)) {
    const double rho = std::max(pt.norm() - cfg.obstacle_radius, cfg.rho_floor);
    if (rho < rho0) {
      const double r = 1.0 / rho - 1.0 / rho0;
      u += 0.5 * cfg.weight_obstacle * r * r;
    }
  }
  for (int i = 0; i < N; ++i) {
    const double lo = std::max(0.0, cfg.q_min(i) + cfg.limit_margin - q(i));
    const double hi = std::max(0.0, q(i) - cfg.q_max(i) + cfg.limit_margin);
    u += cfg.weight_limits * (lo * lo + hi * hi);
  }
  return u;
}

template <int N>
Vec<N> apf_gradient(const Vec<N>& q, const RobotParams<N>& params, const ApfConfig<N>& cfg) {
  Vec<N> grad;
  const double h = cfg.gradient_step;
  for (int i = 0; i < N; ++i) {
    Vec<N> qp = q, qm = q;
    qp(i) += h;
    qm(i) -= h;
    grad(i) = (apf_potential<N>(qp, params, cfg) - apf_potential<N>(qm, params, cfg)) / (2.0 * h);
  }
  return grad;
}

/// D^+ = D^T / (D D^T) and the null-space projector I - D^+ D.
template <int N>
struct TaskProjection {
  Vec<N> Ddag = Vec<N>::Zero();
  Mat<N, N> Nproj = Mat<N, N>::Identity();
};

inline constexpr double kSingularityThreshold = 1e-4;

template <int N>
TaskProjection<N> task_pseudoinverse(const RowVec<N>& task_row,
                                     double threshold = kSingularityThreshold) {
  const double norm = task_row.norm();
  if (!(norm > threshold)) {
    throw DynamicSingularity("task row norm " + std::to_string(norm) +
                             " below singularity threshold");
  }
  TaskProjection<N> tp;
  tp.Ddag = task_row.transpose() / (norm * norm);
  tp.Nproj = Mat<N, N>::Identity() - tp.Ddag * task_row;
  return tp;
}

template <int N>
Vec<N> reference_velocity(const TaskProjection<N>& tp, double alpha_d_dot, double alpha_err,
                          const Vec<N>& xi, double Lambda) {
  return tp.Ddag * (alpha_d_dot - Lambda * alpha_err) + tp.Nproj * xi;
}

/// One extra sinusoid added to the reference.
struct Harmonic {
  double amplitude = 0.0;  // rad
  double frequency = 0.0;  // Hz
};

/// alpha_d(t) = offset + amplitude sin(2 pi t / period) + sum_i a_i sin(2 pi f_i t).
struct ReferenceTrajectory {
  double amplitude = 0.5;  // rad
  double period = 240.0;   // s
  double offset = 0.0;     // rad
  std::vector<Harmonic> harmonics{{0.05, 0.5}, {0.03, 1.3}};

  double angle(double t) const {
    double a = offset + amplitude * std::sin(2.0 * std::numbers::pi * t / period);
    for (const auto& h : harmonics) a += h.amplitude * std::sin(2.0 * std::numbers::pi * h.frequency * t);
    return a;
  }
  double rate(double t) const {
    const double w = 2.0 * std::numbers::pi / period;
    double r = amplitude * w * std::cos(w * t);
    for (const auto& h : harmonics) {
      const double wh = 2.0 * std::numbers::pi * h.frequency;
      r += h.amplitude * wh * std::cos(wh * t);
    }
    return r;
  }
};

template <int N>
Vec<N> robust_term(const Vec<N>& s, double chi, double epsilon, RobustTerm kind) {
  if (chi == 0.0) return Vec<N>::Zero();
  if (kind == RobustTerm::Tanh) return chi * (s / epsilon).array().tanh().matrix();
  const double n = s.norm();
  return n > 0.0 ? Vec<N>(chi * s / n) : Vec<N>::Zero();
}

/// tau_r = M nu_dot + C' nu - Kd s - robust(s).
template <int N>
Vec<N> smc_torque(const Mat<N, N>& M, const Mat<N, N>& Cprime, const Vec<N>& nu,
                  const Vec<N>& nu_dot, const Vec<N>& s, const LhsGains<N>& gains, double chi) {
  return M * nu_dot + Cprime * nu - gains.Kd * s -
         robust_term<N>(s, chi, gains.epsilon, gains.robust_term);
}

struct Envelope {
  double lower = 0.0;
  double upper = 0.0;
};

/// Exponential bounds on V(t) = 1/2 s^T M s under ideal actuation:
///   V0 exp(-2 max eig(Kd) t / inf eig(M)) <= V(t) <= V0 exp(-2 min eig(Kd) t / sup eig(M)).
template <int N>
Envelope lyapunov_envelope(double V0, double t, const EigenBounds& mass_bounds,
                           const Mat<N, N>& Kd) {
  Eigen::SelfAdjointEigenSolver<Mat<N, N>> es(Kd, Eigen::EigenvaluesOnly);
  const double kmin = es.eigenvalues()(0);
  const double kmax = es.eigenvalues()(N - 1);
  return {V0 * std::exp(-2.0 * kmax * t / mass_bounds.min),
          V0 * std::exp(-2.0 * kmin * t / mass_bounds.max)};
}

template <int N>
struct SlidingState {
  double alpha = 0.0;
  double alpha_d = 0.0;
  double alpha_d_dot = 0.0;
  double alpha_err = 0.0;
  Vec<N> nu = Vec<N>::Zero();
  Vec<N> nu_dot = Vec<N>::Zero();
  Vec<N> s = Vec<N>::Zero();
  Vec<N> xi = Vec<N>::Zero();
  double V = 0.0;
};

template <int N>
struct LhsCommand {
  Vec<N> tau_req = Vec<N>::Zero();
  SlidingState<N> sliding{};
  bool singular = false;
  double projector_residual = 0.0;  // |D (I - D^+ D) xi|
};

template <int N>
struct LhsConfig {
  LhsGains<N> gains{};
  ApfConfig<N> apf{};
  ReferenceTrajectory trajectory{};
  double nu_dot_filter_tau = 0.02;  // s
  double singularity_threshold = kSingularityThreshold;
};

/// Stateful outer-loop controller stepped at a fixed rate. Holds the
/// reference-velocity derivative filter and the last valid nu.
template <int N>
class LhsController {
 public:
  LhsController(const LhsConfig<N>& config, const RobotParams<N>& params, double dt)
      : config_(config), params_(params), dt_(dt) {}

  /// Reference velocity and sliding quantities at a state, without touching
  /// the filter. Throws DynamicSingularity.
  SlidingState<N> sliding_state(const SystemState<N>& x, const KinematicsBundle<N>& kb,
                                const Vec<N>& qd, const Mat<N, N>& M,
                                TaskProjection<N>* projection = nullptr) const {
    SlidingState<N> st;
    st.alpha = end_effector_angle<N>(x.q, x.theta0);
    st.alpha_d = config_.trajectory.angle(x.t);
    st.alpha_d_dot = config_.trajectory.rate(x.t);
    st.alpha_err = st.alpha - st.alpha_d;
    const auto tp = task_pseudoinverse<N>(kb.task_row, config_.singularity_threshold);
    if (config_.gains.eta > 0.0) {
      st.xi = -config_.gains.eta * apf_gradient<N>(x.q, params_, config_.apf);
    }
    st.nu = reference_velocity<N>(tp, st.alpha_d_dot, st.alpha_err, st.xi, config_.gains.Lambda);
    st.s = qd - st.nu;
    st.V = 0.5 * st.s.dot(M * st.s);
    if (projection) *projection = tp;
    return st;
  }

  LhsCommand<N> step(const SystemState<N>& x, const KinematicsBundle<N>& kb,
                     const DynamicsMatrices<N>& dyn, double chi) {
    LhsCommand<N> cmd;
    SlidingState<N>& st = cmd.sliding;
    TaskProjection<N> tp;
    try {
      st = sliding_state(x, kb, dyn.qd, dyn.M, &tp);
      cmd.projector_residual = std::abs(kb.task_row * (tp.Nproj * st.xi));
      if (have_previous_) {
        const Vec<N> raw = (st.nu - nu_prev_) / dt_;
        const double a = 1.0 - std::exp(-dt_ / config_.nu_dot_filter_tau);
        nu_dot_ += a * (raw - nu_dot_);
      } else {
        nu_dot_.setZero();
      }
      nu_prev_ = st.nu;
      have_previous_ = true;
    } catch (const DynamicSingularity&) {
      // Hold the last reference velocity and stop feeding its derivative.
      cmd.singular = true;
      st.alpha = end_effector_angle<N>(x.q, x.theta0);
      st.alpha_d = config_.trajectory.angle(x.t);
      st.alpha_d_dot = config_.trajectory.rate(x.t);
      st.alpha_err = st.alpha - st.alpha_d;
      st.nu = have_previous_ ? nu_prev_ : Vec<N>::Zero();
      st.s = dyn.qd - st.nu;
      st.V = 0.5 * st.s.dot(dyn.M * st.s);
      nu_dot_.setZero();
    }
    st.nu_dot = nu_dot_;
    cmd.tau_req = smc_torque<N>(dyn.M, dyn.C, st.nu, st.nu_dot, st.s, config_.gains, chi);
    return cmd;
  }

  void reset() {
    have_previous_ = false;
    nu_prev_.setZero();
    nu_dot_.setZero();
  }

  const LhsConfig<N>& config() const { return config_; }

 private:
  LhsConfig<N> config_;
  RobotParams<N> params_;
  double dt_;
  bool have_previous_ = false;
  Vec<N> nu_prev_ = Vec<N>::Zero();
  Vec<N> nu_dot_ = Vec<N>::Zero();
};

}  // namespace dacph
