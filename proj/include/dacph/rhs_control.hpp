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

/// @file rhs_control.hpp
/// @brief Fast inner loop: port observer, decentralized integrators, gain
/// synthesis with the stability constant c, modal uncertainty factor beta
/// and the online bound chi on the port error.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <type_traits>
#include <vector>

#include "dacph/common.hpp"
#include "dacph/dynamics.hpp"
#include "dacph/learner.hpp"

namespace dacph {

/// tau_obs = M(q) q_ddot + C(q, q_dot) q_dot with the known conservative model.
template <int N>
Vec<N> observe_port(const Vec<N>& q, const Vec<N>& qd, const Vec<N>& qdd,
                    const RobotParams<N>& params) {
  const Mat<N, N> M = mass_matrix<N>(q, 0.0, params);
  const Mat<N, N> C = coriolis_matrix<N>(qd, mass_matrix_derivatives<N>(q, params));
  return M * qdd + C * qd;
}

/// Port observer driven by sampled (q, q_dot). The acceleration is the
/// difference quotient over one sample, which is second-order accurate at
/// the interval midpoint, so the port is evaluated there too. The result
/// passes through a first-order low-pass.
template <int N>
class PortObserver {
 public:
  PortObserver(const RobotParams<N>& params, double dt, double cutoff_hz)
      : params_(params), dt_(dt), alpha_(1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz * dt)) {
    if (!(dt > 0.0) || !(cutoff_hz > 0.0)) throw ConfigError("PortObserver: dt and cutoff must be positive");
  }

  /// Returns false until two samples are available.
  bool update(const Vec<N>& q, const Vec<N>& qd) {
    if (!have_sample_) {
      q_prev_ = q;
      qd_prev_ = qd;
      have_sample_ = true;
      return false;
    }
    const Vec<N> qdd = (qd - qd_prev_) / dt_;
    raw_ = observe_port<N>(0.5 * (q + q_prev_), 0.5 * (qd + qd_prev_), qdd, params_);
    if (!have_output_) {
      filtered_ = raw_;
      have_output_ = true;
    } else {
      filtered_ += alpha_ * (raw_ - filtered_);
    }
    mid_q_ = 0.5 * (q + q_prev_);
    mid_qd_ = 0.5 * (qd + qd_prev_);
    q_prev_ = q;
    qd_prev_ = qd;
    return true;
  }

  bool ready() const { return have_output_; }
  const Vec<N>& tau() const { return filtered_; }
  const Vec<N>& raw() const { return raw_; }
  const Vec<N>& midpoint_q() const { return mid_q_; }
  const Vec<N>& midpoint_qd() const { return mid_qd_; }
  double filter_coefficient() const { return alpha_; }

  void reset() {
    have_sample_ = have_output_ = false;
    filtered_.setZero();
    raw_.setZero();
  }

 private:
  RobotParams<N> params_;
  double dt_;
  double alpha_;
  bool have_sample_ = false;
  bool have_output_ = false;
  Vec<N> q_prev_ = Vec<N>::Zero(), qd_prev_ = Vec<N>::Zero();
  Vec<N> mid_q_ = Vec<N>::Zero(), mid_qd_ = Vec<N>::Zero();
  Vec<N> raw_ = Vec<N>::Zero(), filtered_ = Vec<N>::Zero();
};

enum class IntegratorKind { Euler, Trapezoidal };

/// Per-channel integral action u_i += k_i e_i dt.
template <int N>
class DecentralizedIntegrator {
 public:
  explicit DecentralizedIntegrator(IntegratorKind kind = IntegratorKind::Euler,
                                   const Vec<N>& u0 = Vec<N>::Zero())
      : kind_(kind), u_(u0) {}

  const Vec<N>& step(const Vec<N>& e, const Vec<N>& k, double dt) {
    if (!e.allFinite() || !k.allFinite()) throw NumericAbort("integrator: non-finite port error or gain");
    if (kind_ == IntegratorKind::Euler || !have_prev_) {
      u_ += k.cwiseProduct(e) * dt;
    } else {
      u_ += 0.5 * k.cwiseProduct(e + e_prev_) * dt;
    }
    e_prev_ = e;
    have_prev_ = true;
    return u_;
  }

  const Vec<N>& u() const { return u_; }
  void set(const Vec<N>& u) { u_ = u; }

 private:
  IntegratorKind kind_;
  Vec<N> u_;
  Vec<N> e_prev_ = Vec<N>::Zero();
  bool have_prev_ = false;
};

template <int N>
using CVec = Eigen::Matrix<std::complex<double>, N, 1>;
template <int N>
using CMat = Eigen::Matrix<std::complex<double>, N, N>;

struct GainSettings {
  double Td = 2.0;
  double safety = 1.1;
  double beta_cap_log = 10.0;      // beta is clamped to [1, exp(beta_cap_log)]
  double det_threshold = 1e-8;
  double stability_limit = 0.95;   // bound on the spectral radius of the sampled inner loop
  double observer_alpha = 1.0;     // observer low-pass coefficient; 1 means unfiltered
  double condition_limit = 1e8;
};

/// Everything committed at one gain-synthesis instant.
template <int N>
struct GainSynthesis {
  Mat<N, N> B0 = Mat<N, N>::Identity();
  Vec<N> D0 = Vec<N>::Zero();
  Mat<N, 2 * N> J0 = Mat<N, 2 * N>::Zero();
  CVec<N> eigvals = CVec<N>::Zero();
  CMat<N> T = CMat<N>::Identity();
  CMat<N> Tinv = CMat<N>::Identity();
  std::array<int, N> mode_channel{};  // channel whose integrator a mode is assigned to
  double beta = 1.0;
  double c = 0.0;
  Vec<N> k = Vec<N>::Zero();
  double Td = 2.0;
  double lambda_lhs = 0.0;  // 2 max eig(Kd) / inf eig(M)
  double sigma_rhs = 0.0;
  double sigma_n = 0.0;     // Td * lambda_lhs, the rate sigma_rhs must exceed
  double T0 = 0.0;          // settling target 5 / (Td lambda_lhs)
  double loop_radius = 0.0; // spectral radius of the sampled integrator and observer loop
  bool separated = false;
};

/// Eigenpairs of B with modes ordered by ascending real part, then imaginary.
template <int N>
void eigen_modes(const Mat<N, N>& B, CVec<N>& vals, CMat<N>& T) {
  Eigen::EigenSolver<Mat<N, N>> es(B, true);
  if (es.info() != Eigen::Success) throw GainFreeze("eigendecomposition of B failed");
  std::array<int, N> order{};
  for (int i = 0; i < N; ++i) order[i] = i;
  const auto ev = es.eigenvalues();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (ev(a).real() != ev(b).real()) return ev(a).real() < ev(b).real();
    return ev(a).imag() < ev(b).imag();
  });
  const auto V = es.eigenvectors();
  for (int i = 0; i < N; ++i) {
    vals(i) = ev(order[i]);
    T.col(i) = V.col(order[i]);
  }
}

/// Stability constant and decentralized gains from the current estimates.
/// Throws GainFreeze when B is not DIC (near-singular or an eigenvalue with
/// non-positive real part) or when the discrete loop would be too fast.
/// Spectral radius of one step of the sampled inner loop
///   f_k = (1 - a) f_{k-1} + a B u_{k-1},  u_k = u_{k-1} - dt K f_k
/// with a the observer low-pass coefficient.
template <int N>
double inner_loop_radius(const Vec<N>& k, const Mat<N, N>& B, double dt, double a) {
  const Mat<N, N> dK = dt * k.asDiagonal().toDenseMatrix();
  Mat<2 * N, 2 * N> A;
  A.template topLeftCorner<N, N>() = Mat<N, N>::Identity() - a * dK * B;
  A.template topRightCorner<N, N>() = -(1.0 - a) * dK;
  A.template bottomLeftCorner<N, N>() = a * B;
  A.template bottomRightCorner<N, N>() = (1.0 - a) * Mat<N, N>::Identity();
  Eigen::EigenSolver<Mat<2 * N, 2 * N>> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

template <int N>
GainSynthesis<N> synthesize_gains(const Mat<N, N>& B_hat, const Vec<N>& D_hat,
                                  const Mat<N, 2 * N>& J_hat, const Mat<N, N>& Kd,
                                  double lam_min_M, double beta_hat, double dt,
                                  const GainSettings& settings = {}) {
  if (!B_hat.allFinite()) throw GainFreeze("non-finite B estimate");
  const double det = B_hat.determinant();
  if (std::abs(det) < settings.det_threshold) {
    throw GainFreeze("DIC violated: |det B| = " + std::to_string(std::abs(det)));
  }
  GainSynthesis<N> gs;
  gs.B0 = B_hat;
  gs.D0 = D_hat;
  gs.J0 = J_hat;
  gs.Td = settings.Td;
  eigen_modes<N>(B_hat, gs.eigvals, gs.T);
  for (int p = 0; p < N; ++p) {
    if (!(gs.eigvals(p).real() > 0.0)) {
      throw GainFreeze("DIC violated: eigenvalue " + std::to_string(gs.eigvals(p).real()) + " + " +
                       std::to_string(gs.eigvals(p).imag()) + "i of B has non-positive real part");
    }
  }
  gs.Tinv = gs.T.inverse();

  Eigen::SelfAdjointEigenSolver<Mat<N, N>> kd(Kd, Eigen::EigenvaluesOnly);
  const double kd_max = kd.eigenvalues()(N - 1);
  gs.beta = std::clamp(beta_hat, 1.0, std::exp(settings.beta_cap_log));
  gs.lambda_lhs = 2.0 * kd_max / lam_min_M;
  const double c_min = 2.0 * settings.Td * settings.Td * kd_max / lam_min_M * (1.0 + std::log(gs.beta) / 5.0);
  gs.c = settings.safety * c_min;

  // Each mode drives the free channel where its eigenvector is largest.
  std::array<bool, N> taken{};
  for (int p = 0; p < N; ++p) {
    int best = -1;
    for (int i = 0; i < N; ++i) {
      if (!taken[i] && (best < 0 || std::abs(gs.T(i, p)) > std::abs(gs.T(best, p)))) best = i;
    }
    taken[best] = true;
    gs.mode_channel[p] = best;
    gs.k(best) = gs.c / gs.eigvals(p).real();
  }
  gs.sigma_rhs = std::numeric_limits<double>::infinity();
  for (int p = 0; p < N; ++p) {
    gs.sigma_rhs = std::min(gs.sigma_rhs, gs.k(gs.mode_channel[p]) * gs.eigvals(p).real());
  }
  gs.sigma_n = settings.Td * gs.lambda_lhs;
  gs.T0 = 5.0 / gs.sigma_n;
  gs.separated = gs.sigma_rhs > gs.sigma_n;

  Eigen::EigenSolver<Mat<N, N>> kb(gs.k.asDiagonal() * B_hat, false);
  if (!(kb.eigenvalues().real().minCoeff() > 0.0)) throw GainFreeze("decentralized loop K B is not stable");
  gs.loop_radius = inner_loop_radius<N>(gs.k, B_hat, dt, settings.observer_alpha);
  // The margin applies past deadbeat; a slow loop has radius near one but no oscillation.
  const bool overdriven = dt * kb.eigenvalues().cwiseAbs().maxCoeff() > 1.0;
  if (!(gs.loop_radius < 1.0) || (overdriven && !(gs.loop_radius < settings.stability_limit))) {
    throw GainFreeze("sampled inner loop too fast: spectral radius " + std::to_string(gs.loop_radius));
  }
  return gs;
}

/// Modal products T_ip Gamma_pj for the three channel families:
/// input (T^-1), dissipation (T^-1 diag(d)) and linearization (T^-1 J0).
/// Summing a family over all modes gives back the unmodalized matrix.
template <int N>
struct ModalProducts {
  std::array<CMat<N>, N> input{};
  std::array<CMat<N>, N> dissipation{};
  std::array<Eigen::Matrix<std::complex<double>, N, 2 * N>, N> linearization{};
};

template <int N>
ModalProducts<N> modal_products(const CMat<N>& T, const CMat<N>& Tinv, const Vec<N>& d,
                                const Mat<N, 2 * N>& J0) {
  ModalProducts<N> mp;
  const Eigen::Matrix<std::complex<double>, N, 2 * N> G3 = Tinv * J0.template cast<std::complex<double>>();
  for (int p = 0; p < N; ++p) {
    mp.input[p] = T.col(p) * Tinv.row(p);
    mp.dissipation[p] = mp.input[p] * d.template cast<std::complex<double>>().asDiagonal();
    mp.linearization[p] = T.col(p) * G3.row(p);
  }
  return mp;
}

struct ModeAnalysis {
  std::vector<double> beta_mode;
  double beta = 1.0;
  bool ill_conditioned = false;
  int clusters = 0;
};

/// Worst-case multiplicative drift of the modal products between the
/// committed synthesis point and the current estimates.
///
/// Current modes are matched to the nominal mode nearest in eigenvalue.
/// Modes whose eigenvalues lie within cluster_tol (relative) of each other on
/// either side are merged and their products summed, since individual
/// projectors of nearly repeated eigenvalues are arbitrary. Entries are
/// compared as (|cur| + f) / (|nom| + f) with f a fraction of the largest
/// nominal product, so that vanishing nominal products (J0 is zero at rest)
/// do not dominate.
template <int N>
ModeAnalysis mode_analysis(const GainSynthesis<N>& nominal, const Mat<N, N>& B_hat,
                           const Vec<N>& D_hat, const Mat<N, 2 * N>& J_hat,
                           const GainSettings& settings = {}, double relative_floor = 0.1,
                           double cluster_tol = 0.1) {
  ModeAnalysis out;
  out.beta_mode.assign(N, 1.0);
  const double cap = std::exp(settings.beta_cap_log);
  CVec<N> vals;
  CMat<N> T;
  try {
    eigen_modes<N>(B_hat, vals, T);
  } catch (const GainFreeze&) {
    out.ill_conditioned = true;
  }
  if (!out.ill_conditioned) {
    Eigen::JacobiSVD<CMat<N>> svd(T);
    const auto sv = svd.singularValues();
    out.ill_conditioned = !(sv(N - 1) > 0.0) || sv(0) / sv(N - 1) > settings.condition_limit;
  }
  if (out.ill_conditioned) {
    out.beta = cap;
    std::fill(out.beta_mode.begin(), out.beta_mode.end(), cap);
    return out;
  }
  const auto cur = modal_products<N>(T, T.inverse(), D_hat, J_hat);
  const auto nom = modal_products<N>(nominal.T, nominal.Tinv, nominal.D0, nominal.J0);

  std::array<int, N> match{};
  std::array<bool, N> used{};
  for (int p = 0; p < N; ++p) {
    int best = -1;
    for (int r = 0; r < N; ++r) {
      if (!used[r] && (best < 0 || std::abs(vals(p) - nominal.eigvals(r)) <
                                       std::abs(vals(p) - nominal.eigvals(best)))) {
        best = r;
      }
    }
    used[best] = true;
    match[p] = best;
  }

  auto close = [&](std::complex<double> a, std::complex<double> b) {
    return std::abs(a - b) <= cluster_tol * std::max(std::abs(a), std::abs(b));
  };
  std::array<int, N> group{};
  for (int p = 0; p < N; ++p) group[p] = p;
  auto root = [&](int p) {
    while (group[p] != p) p = group[p];
    return p;
  };
  for (int p = 0; p < N; ++p) {
    for (int r = p + 1; r < N; ++r) {
      if (close(vals(p), vals(r)) || close(nominal.eigvals(match[p]), nominal.eigvals(match[r]))) {
        group[root(r)] = root(p);
      }
    }
  }

  double scale = 0.0;
  for (int r = 0; r < N; ++r) {
    scale = std::max({scale, nom.input[r].cwiseAbs().maxCoeff(), nom.dissipation[r].cwiseAbs().maxCoeff(),
                      nom.linearization[r].cwiseAbs().maxCoeff()});
  }
  const double f = relative_floor * scale + 1e-12;

  for (int g = 0; g < N; ++g) {
    if (root(g) != g) continue;
    ++out.clusters;
    double b = 1.0;
    auto family = [&](const auto& c, const auto& n) {
      using M = std::decay_t<decltype(c[0])>;
      M cs = M::Zero(), ns = M::Zero();
      for (int p = 0; p < N; ++p) {
        if (root(p) != g) continue;
        cs += c[p];
        ns += n[match[p]];
      }
      b = std::max(b, ((cs.cwiseAbs().array() + f) / (ns.cwiseAbs().array() + f)).maxCoeff());
    };
    family(cur.input, nom.input);
    family(cur.dissipation, nom.dissipation);
    family(cur.linearization, nom.linearization);
    b = std::min(b, cap);
    for (int p = 0; p < N; ++p) {
      if (root(p) == g) out.beta_mode[p] = b;
    }
    out.beta = std::max(out.beta, b);
  }
  return out;
}

/// J0 = d/dx (D(x) q_dot0 - B(x) u0) at x0 = [q0; p0] by central differences.
template <int N>
Mat<N, 2 * N> compute_J0(const OnlineLearner& learner, const Vec<N>& q0, const Vec<N>& p0,
                         const Vec<N>& u0, const Vec<N>& qd0, double h = 1e-5) {
  auto map = [&](const Vec<N>& q, const Vec<N>& p) {
    const Estimate e = learner.estimate(q, p);
    return Vec<N>(e.D.cwiseProduct(qd0) - e.B * u0);
  };
  Mat<N, 2 * N> J;
  for (int j = 0; j < 2 * N; ++j) {
    Vec<N> qp = q0, qm = q0, pp = p0, pm = p0;
    if (j < N) {
      qp(j) += h;
      qm(j) -= h;
    } else {
      pp(j - N) += h;
      pm(j - N) -= h;
    }
    J.col(j) = (map(qp, pp) - map(qm, pm)) / (2.0 * h);
  }
  return J;
}

struct ChiSettings {
  double window = 1.0;           // s
  double decay = 0.995;          // per decay_interval without a new maximum
  double decay_interval = 0.01;  // s
  double floor = 1e-4;           // N m
};

/// Online bound on ||e_tau||: running maximum over a sliding window, with a
/// slow geometric release once the window maximum falls.
class ChiEstimator {
 public:
  ChiEstimator(const ChiSettings& settings, double dt)
      : settings_(settings),
        ring_(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(settings.window / dt)))),
        chi_(settings.floor) {}

  void push(double e_norm) {
    ring_[head_] = e_norm;
    head_ = (head_ + 1) % ring_.size();
    count_ = std::min(count_ + 1, ring_.size());
  }

  /// elapsed is the time since the previous update.
  double update(double elapsed) {
    double wmax = 0.0;
    for (std::size_t i = 0; i < count_; ++i) wmax = std::max(wmax, ring_[i]);
    const double release = std::pow(settings_.decay, elapsed / settings_.decay_interval);
    chi_ = wmax >= chi_ ? wmax : std::max(wmax, release * chi_);
    chi_ = std::max(chi_, settings_.floor);
    return chi_;
  }

  double chi() const { return chi_; }
  const ChiSettings& settings() const { return settings_; }

 private:
  ChiSettings settings_;
  std::vector<double> ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  double chi_;
};

}  // namespace dacph
