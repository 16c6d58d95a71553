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
#include <functional>
#include <numbers>

#include <gtest/gtest.h>

#include "dacph/random.hpp"
#include "dacph/rhs_control.hpp"
#include "dacph/sim_engine.hpp"

namespace dacph {
namespace {

// Drives the free plant with tau(t) from q = (0.5, -0.8) at rest and
// returns (t, applied tau, observer output) per step.
template <typename F>
void drive(F&& tau_of, double duration, double cutoff_hz,
           const std::function<void(double, const Vec2&, const Vec2&)>& sink) {
  const auto P = reference_robot();
  const double dt = 1e-3;
  PortObserver<2> obs(P, dt, cutoff_hz);
  SystemState<2> x;
  x.q = Vec2(0.5, -0.8);
  auto port = [&](const SystemState<2>& s, const StageEval<2>&) -> Vec2 { return tau_of(s.t); };
  const long n = std::lround(duration / dt);
  for (long k = 0; k <= n; ++k) {
    x.t = k * dt;
    const auto ev = evaluate_stage<2>(x, P);
    // The observer reports the port at the midpoint of the last interval.
    if (obs.update(x.q, ev.dyn.qd)) sink(x.t - 0.5 * dt, tau_of(x.t - 0.5 * dt), obs.tau());
    if (k == n) break;
    x = rk4_step<2>(x, dt, P, port, &ev);
  }
}

TEST(PortObserver, RestGivesZero) {
  PortObserver<2> obs(reference_robot(), 1e-3, 50.0);
  EXPECT_FALSE(obs.update(Vec2(0.5, -0.8), Vec2::Zero()));
  EXPECT_TRUE(obs.update(Vec2(0.5, -0.8), Vec2::Zero()));
  EXPECT_TRUE(obs.tau().isZero(0.0));
}

TEST(PortObserver, ConstantDrive) {
  const Vec2 tau(0.02, -0.01);
  double worst = 0.0;
  drive([&](double) { return tau; }, 1.0, 50.0, [&](double t, const Vec2& applied, const Vec2& seen) {
    if (t > 0.1) worst = std::max(worst, (seen - applied).norm() / applied.norm());
  });
  EXPECT_LT(worst, 0.01);
}

TEST(PortObserver, SinusoidalDriveAtHalfHertz) {
  const double w = 2.0 * std::numbers::pi * 0.5, A = 0.01;
  // Lock-in demodulation over whole periods after the filter settles.
  Vec2 ic = Vec2::Zero(), is = Vec2::Zero(), oc = Vec2::Zero(), os = Vec2::Zero();
  drive([&](double t) { return Vec2(A * std::sin(w * t), -0.5 * A * std::sin(w * t)); }, 6.0, 50.0,
        [&](double t, const Vec2& applied, const Vec2& seen) {
          if (t < 2.0 || t >= 6.0) return;
          ic += applied * std::cos(w * t);
          is += applied * std::sin(w * t);
          oc += seen * std::cos(w * t);
          os += seen * std::sin(w * t);
        });
  for (int j = 0; j < 2; ++j) {
    const double amp_in = std::hypot(ic(j), is(j)), amp_out = std::hypot(oc(j), os(j));
    const double lag = std::atan2(ic(j), is(j)) - std::atan2(oc(j), os(j));
    EXPECT_LT(std::abs(amp_out / amp_in - 1.0), 0.03) << j;
    EXPECT_LT(std::abs(lag) * 180.0 / std::numbers::pi, 5.0) << j;
  }
}

TEST(Integrator, ZeroErrorKeepsOutput) {
  DecentralizedIntegrator<2> in(IntegratorKind::Euler, Vec2(0.3, -0.2));
  in.step(Vec2::Zero(), Vec2(5.0, 7.0), 1e-3);
  EXPECT_EQ(in.u(), Vec2(0.3, -0.2));
}

TEST(Integrator, ConstantErrorIntegratesExactly) {
  for (auto kind : {IntegratorKind::Euler, IntegratorKind::Trapezoidal}) {
    DecentralizedIntegrator<2> in(kind);
    const Vec2 e0(0.25, -0.5), k(4.0, 2.0);
    for (int i = 0; i < 1024; ++i) in.step(e0, k, 1.0 / 1024.0);
    EXPECT_LT((in.u() - k.cwiseProduct(e0)).norm(), 1e-13);
  }
}

TEST(Integrator, NonFiniteErrorAborts) {
  DecentralizedIntegrator<2> in;
  EXPECT_THROW(in.step(Vec2(NAN, 0.0), Vec2(1.0, 1.0), 1e-3), NumericAbort);
}

// B = I with ideal measurement: e decays as (1 - k dt)^n.
TEST(Integrator, FirstOrderSettling) {
  const Vec2 k(10.0, 25.0);
  const Vec2 tau_r(0.3, -0.2);
  const double dt = 1e-3;
  for (int j = 0; j < 2; ++j) {
    const double limit = 4.0 / k(j);
    bool settled = false;
    DecentralizedIntegrator<2> in;
    for (int n = 1; n * dt <= limit + 1e-12; ++n) {
      const Vec2 e = tau_r - in.u();
      in.step(e, k, dt);
      if (std::abs(tau_r(j) - in.u()(j)) <= 0.02 * std::abs(tau_r(j))) settled = true;
    }
    EXPECT_TRUE(settled) << j;
  }
}

struct SynthesisFixture : ::testing::Test {
  Mat2 Kd = 0.5 * Mat2::Identity();
  EigenBounds mb = mass_eigen_bounds<2>(reference_robot(), 100);
  Mat<2, 4> J0 = Mat<2, 4>::Zero();
  Vec2 D = Vec2(0.1, 0.1);
};

TEST_F(SynthesisFixture, PlugInConstant) {
  const auto gs = synthesize_gains<2>(Mat2::Identity(), D, J0, Kd, mb.min, 1.0, 1e-3);
  const double c = 1.1 * 2.0 * 4.0 * 0.5 / mb.min;
  EXPECT_NEAR(gs.c, c, 1e-12 * c);
  EXPECT_NEAR(gs.k(0), c, 1e-12 * c);
  EXPECT_NEAR(gs.k(1), c, 1e-12 * c);
  EXPECT_NEAR(gs.sigma_rhs, c, 1e-12 * c);
  EXPECT_NEAR(gs.T0, 5.0 / (2.0 * 2.0 * 0.5 / mb.min), 1e-15);
  EXPECT_TRUE(gs.separated);
}

TEST_F(SynthesisFixture, BetaDoublesConstant) {
  const auto a = synthesize_gains<2>(Mat2::Identity(), D, J0, Kd, mb.min, 1.0, 1e-4);
  const auto b = synthesize_gains<2>(Mat2::Identity(), D, J0, Kd, mb.min, std::exp(5.0), 1e-4);
  EXPECT_NEAR(b.c / a.c, 2.0, 1e-12);
}

TEST_F(SynthesisFixture, BetaBelowOneIsClamped) {
  const auto a = synthesize_gains<2>(Mat2::Identity(), D, J0, Kd, mb.min, 0.2, 1e-3);
  EXPECT_EQ(a.beta, 1.0);
}

TEST_F(SynthesisFixture, GainsUseRealParts) {
  const Mat2 B = (Mat2() << 2.0, -0.5, 0.5, 2.0).finished();  // eigenvalues 2 +- 0.5i
  const auto gs = synthesize_gains<2>(B, D, J0, Kd, mb.min, 1.0, 1e-3);
  EXPECT_NEAR(gs.k(0), gs.c / 2.0, 1e-12 * gs.c);
  EXPECT_NEAR(gs.k(1), gs.c / 2.0, 1e-12 * gs.c);
}

TEST_F(SynthesisFixture, FreezesOnDicViolation) {
  EXPECT_THROW(synthesize_gains<2>((Mat2() << 1, 1, 1, 1).finished(), D, J0, Kd, mb.min, 1.0, 1e-3), GainFreeze);
  EXPECT_THROW(synthesize_gains<2>(Vec2(1.0, -0.5).asDiagonal().toDenseMatrix(), D, J0, Kd, mb.min, 1.0, 1e-3),
               GainFreeze);
  EXPECT_THROW(synthesize_gains<2>(Mat2::Identity(), D, J0, Kd, mb.min, 1.0, 1e-2), GainFreeze);
}

TEST_F(SynthesisFixture, SlowSampledLoopIsAccepted) {
  // dt c well below one: radius near one, but stable and not oscillating.
  const auto gs = synthesize_gains<2>(Mat2::Identity(), D, J0, Kd, mb.min, 1.0, 1e-5);
  EXPECT_GT(gs.loop_radius, 0.95);
  EXPECT_LT(gs.loop_radius, 1.0);
}

TEST(InnerLoop, RadiusClosedFormWithoutFilter) {
  const Vec2 k(300.0, 800.0);
  const Mat2 B = Vec2(1.5, 0.7).asDiagonal();
  const double dt = 1e-3;
  const double expected = std::max(std::abs(1.0 - dt * k(0) * 1.5), std::abs(1.0 - dt * k(1) * 0.7));
  EXPECT_NEAR(inner_loop_radius<2>(k, B, dt, 1.0), expected, 1e-12);
}

// Modal products of a 2x2 matrix with real distinct eigenvalues, built from
// the spectral projectors P_p = (B - l_r I) / (l_p - l_r).
struct ProjectorOracle {
  std::array<double, 2> l{};
  std::array<Mat2, 2> P{};
  explicit ProjectorOracle(const Mat2& B) {
    const double tr = B.trace(), det = B.determinant();
    const double disc = std::sqrt(tr * tr / 4.0 - det);
    l = {tr / 2.0 - disc, tr / 2.0 + disc};
    P[0] = (B - l[1] * Mat2::Identity()) / (l[0] - l[1]);
    P[1] = (B - l[0] * Mat2::Identity()) / (l[1] - l[0]);
  }
};

double oracle_beta(const Mat2& Bn, const Vec2& Dn, const Mat<2, 4>& Jn, const Mat2& Bc, const Vec2& Dc,
                   const Mat<2, 4>& Jc) {
  const ProjectorOracle n(Bn), c(Bc);
  double scale = 0.0;
  for (int p = 0; p < 2; ++p) {
    scale = std::max({scale, n.P[p].cwiseAbs().maxCoeff(), (n.P[p] * Dn.asDiagonal()).cwiseAbs().maxCoeff(),
                      (n.P[p] * Jn).cwiseAbs().maxCoeff()});
  }
  const double f = 0.1 * scale + 1e-12;
  double beta = 1.0;
  auto ratio = [&](double cur, double nom) { beta = std::max(beta, (std::abs(cur) + f) / (std::abs(nom) + f)); };
  for (int p = 0; p < 2; ++p) {
    const Mat2 a = c.P[p], b = n.P[p];
    const Mat2 ad = a * Dc.asDiagonal(), bd = b * Dn.asDiagonal();
    const Mat<2, 4> aj = a * Jc, bj = b * Jn;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        ratio(a(i, j), b(i, j));
        ratio(ad(i, j), bd(i, j));
      }
      for (int j = 0; j < 4; ++j) ratio(aj(i, j), bj(i, j));
    }
  }
  return std::min(beta, std::exp(10.0));
}

TEST(ModeAnalysis, IdenticalEstimatesGiveOne) {
  const Mat2 B = (Mat2() << 1.0, 0.3, 0.2, 4.0).finished();
  const Vec2 D(0.1, 0.2);
  const Mat<2, 4> J = Mat<2, 4>::Constant(0.05);
  const auto gs = synthesize_gains<2>(B, D, J, Mat2(0.5 * Mat2::Identity()), 0.05, 1.0, 1e-4);
  EXPECT_NEAR(mode_analysis<2>(gs, B, D, J).beta, 1.0, 1e-12);
}

TEST(ModeAnalysis, MatchesProjectorOracle) {
  const Mat2 Bn = (Mat2() << 1.0, 0.3, 0.2, 4.0).finished();
  const Vec2 Dn(0.1, 0.2);
  Mat<2, 4> Jn;
  Jn << 0.01, -0.02, 0.03, 0.0, 0.05, 0.01, -0.04, 0.02;
  const auto gs = synthesize_gains<2>(Bn, Dn, Jn, Mat2(0.5 * Mat2::Identity()), 0.05, 1.0, 1e-4);

  // Uniform scaling leaves the spectral projectors unchanged.
  const auto scaled = mode_analysis<2>(gs, Mat2(2.0 * Bn), Dn, Jn);
  EXPECT_NEAR(scaled.beta, oracle_beta(Bn, Dn, Jn, 2.0 * Bn, Dn, Jn), 1e-9);
  EXPECT_NEAR(scaled.beta, 1.0, 1e-9);

  const Mat2 Bc = (Mat2() << 1.2, 0.9, -0.1, 3.5).finished();
  const Vec2 Dc(0.3, 0.15);
  const Mat<2, 4> Jc = 2.5 * Jn;
  const auto moved = mode_analysis<2>(gs, Bc, Dc, Jc);
  EXPECT_NEAR(moved.beta, oracle_beta(Bn, Dn, Jn, Bc, Dc, Jc), 1e-9);
  EXPECT_GT(moved.beta, 1.5);
  EXPECT_EQ(moved.clusters, 2);
}

TEST(ModeAnalysis, DiagonalFamilies) {
  const Vec2 d(0.3, 0.7);
  Mat<2, 4> J;
  J << 1, 2, 3, 4, 5, 6, 7, 8;
  const auto mp = modal_products<2>(CMat<2>::Identity(), CMat<2>::Identity(), d, J);
  for (int p = 0; p < 2; ++p) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double delta = (i == p && j == p) ? 1.0 : 0.0;
        EXPECT_EQ(mp.input[p](i, j), delta);
        EXPECT_EQ(mp.dissipation[p](i, j), delta * d(j));
      }
      for (int j = 0; j < 4; ++j) EXPECT_EQ(mp.linearization[p](i, j).real(), i == p ? J(p, j) : 0.0);
    }
  }
}

TEST(ModeAnalysis, IllConditionedFallsBackToCap) {
  const auto gs = synthesize_gains<2>(Mat2::Identity(), Vec2(0.1, 0.1), Mat<2, 4>::Zero(),
                                      Mat2(0.5 * Mat2::Identity()), 0.05, 1.0, 1e-4);
  const Mat2 defective = (Mat2() << 1.0, 1.0, 0.0, 1.0).finished();
  const auto ma = mode_analysis<2>(gs, defective, Vec2(0.1, 0.1), Mat<2, 4>::Zero());
  EXPECT_TRUE(ma.ill_conditioned);
  EXPECT_NEAR(ma.beta, std::exp(10.0), 1e-6);
}

TEST(Chi, FloorWithoutError) {
  ChiEstimator chi(ChiSettings{}, 1e-3);
  for (int i = 0; i < 2000; ++i) {
    chi.push(0.0);
    chi.update(1e-3);
  }
  EXPECT_EQ(chi.chi(), 1e-4);
}

TEST(Chi, SpikeThenRelease) {
  ChiEstimator chi(ChiSettings{}, 1e-3);
  chi.push(0.5);
  EXPECT_EQ(chi.update(1e-3), 0.5);
  double prev = 0.5;
  for (int i = 0; i < 30000; ++i) {
    chi.push(0.0);
    const double c = chi.update(1e-3);
    ASSERT_LE(c, prev);
    prev = c;
  }
  EXPECT_EQ(prev, 1e-4);
}

TEST(Chi, SteadyLevel) {
  ChiEstimator chi(ChiSettings{}, 1e-3);
  for (int i = 0; i < 1000; ++i) {
    chi.push(0.1);
    chi.update(1e-3);
  }
  EXPECT_EQ(chi.chi(), 0.1);
}

TEST(ComputeJ0, ZeroCases) {
  OnlineLearner learner(2, LearnerConfig{});
  const Vec2 q(0.3, -0.4), p(0.1, 0.2);
  EXPECT_TRUE(compute_J0<2>(learner, q, p, Vec2::Zero(), Vec2::Zero()).isZero(0.0));
  learner.network().zero_weights();
  EXPECT_TRUE(compute_J0<2>(learner, q, p, Vec2(1.0, 2.0), Vec2(0.5, -0.5)).isZero(0.0));
}

TEST(ComputeJ0, DirectionalDerivatives) {
  LearnerConfig cfg;
  cfg.init_scale = 1.0;
  OnlineLearner learner(2, cfg);
  const Vec2 q(0.3, -0.4), p(0.1, 0.2), u0(0.7, -0.3), qd0(0.2, 0.4);
  const auto J = compute_J0<2>(learner, q, p, u0, qd0);
  auto map = [&](const Vec<4>& x) {
    const auto e = learner.estimate(x.head<2>(), x.tail<2>());
    return Vec2(e.D.cwiseProduct(qd0) - e.B * u0);
  };
  Vec<4> x0;
  x0 << q, p;
  const CounterRng rng(10, 10);
  std::uint64_t c = 0;
  for (int i = 0; i < 10; ++i) {
    Vec<4> v;
    for (int j = 0; j < 4; ++j) v(j) = rng.uniform(c++, -1.0, 1.0);
    const double h = 5e-6;
    const Vec2 fd = (map(x0 + h * v) - map(x0 - h * v)) / (2.0 * h);
    EXPECT_LT((J * v - fd).norm() / fd.norm(), 1e-4) << i;
  }
}

}  // namespace
}  // namespace dacph
