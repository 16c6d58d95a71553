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

#include <gtest/gtest.h>

#include "dacph/ph_core.hpp"
#include "dacph/sim_engine.hpp"

namespace dacph {
namespace {

Eigen::VectorXd stack(const Vec2& a, const Vec2& b) {
  Eigen::VectorXd v(4);
  v << a, b;
  return v;
}

TEST(PhStructure, MechanicalBlocks) {
  const Mat2 D = Vec2(0.3, 0.7).asDiagonal();
  const Mat2 B = (Mat2() << 1.0, 0.2, -0.1, 0.9).finished();
  const auto s = PhStructure::mechanical(D, B);
  EXPECT_EQ(s.n(), 2);
  EXPECT_TRUE((s.J() + s.J().transpose()).isZero(0.0));
  EXPECT_TRUE(s.R().isApprox(s.R().transpose()));
  EXPECT_GE(s.min_dissipation_eigenvalue(), -1e-12);
  EXPECT_TRUE(s.R().topLeftCorner(2, 2).isZero(0.0));
  EXPECT_TRUE(s.g().topRows(2).isZero(0.0));
  EXPECT_TRUE(s.g().bottomLeftCorner(2, 2).isApprox(B));
  EXPECT_TRUE(s.g().bottomRightCorner(2, 2).isIdentity());
}

TEST(PhStructure, RejectsMismatchedSizes) {
  EXPECT_THROW(PhStructure::mechanical(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 2)), DimensionError);
  EXPECT_THROW(PhStructure::mechanical(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 2)), DimensionError);
}

TEST(Decompose, ConservativeFlowHasZeroPort) {
  const auto s = PhStructure::conservative(2);
  const Eigen::VectorXd grad = stack(Vec2(0.4, -1.2), Vec2(0.3, 0.25));
  const Eigen::VectorXd xdot = s.J() * grad;
  const auto port = decompose(xdot, grad, s);
  EXPECT_TRUE(port.Pi().isZero(1e-15));
}

TEST(Decompose, ZeroGradientReturnsForce) {
  const auto s = PhStructure::conservative(2);
  const Vec2 tau0(0.7, -0.2);
  const auto port = decompose(stack(Vec2::Zero(), tau0), Eigen::VectorXd::Zero(4), s);
  EXPECT_TRUE(port.Pi().isApprox(stack(Vec2::Zero(), tau0)));
}

TEST(Decompose, ConfigurationBlockMustVanish) {
  const auto s = PhStructure::conservative(2);
  EXPECT_THROW(decompose(stack(Vec2(1e-3, 0.0), Vec2::Zero()), Eigen::VectorXd::Zero(4), s), DimensionError);
}

TEST(Decompose, SizeMismatchThrows) {
  const auto s = PhStructure::conservative(2);
  EXPECT_THROW(decompose(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(4), s), DimensionError);
  EXPECT_THROW(decompose(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(5), s), DimensionError);
}

TEST(Decompose, RecoversRealizedPortOfDrivenPlant) {
  const auto P = reference_robot();
  const Vec2 q(0.3, -0.9), qd(0.2, -0.4);
  const auto dm = dynamics_matrices<2>(q, Vec2(mass_matrix<2>(q, 0.0, P) * qd), P);
  const TrueMatrices tm = true_matrices(q, dm.M * qd, Phase::NonlinearUncertainty);
  const Vec2 u(0.5, -0.3), d(0.05, 0.01);
  const Vec2 tau = realized_port(u, qd, tm, d);
  const Vec2 dHdq = dH_dq<2>(dm.qd, dm.dMdq);
  const Eigen::VectorXd grad = stack(dHdq, dm.qd);
  const Eigen::VectorXd xdot = stack(dm.qd, Vec2(-dHdq + tau));
  const auto port = decompose(xdot, grad, PhStructure::conservative(2));
  EXPECT_LT((port.tau - tau).norm(), 1e-12);
}

TEST(PowerBalance, TrivialCases) {
  EXPECT_EQ(power_balance(Vec2::Zero(), Vec2(1.0, 2.0)), 0.0);
  EXPECT_EQ(power_balance(Vec2(1.0, 2.0), Vec2::Zero()), 0.0);
  EXPECT_DOUBLE_EQ(power_balance(Vec2(1.0, 2.0), Vec2(3.0, -1.0)), 1.0);
}

// Integrated supplied power against the Hamiltonian difference.
TEST(PowerBalance, QuadratureMatchesHamiltonian) {
  const auto P = reference_robot();
  SystemState<2> x;
  x.q = Vec2(0.5, -0.8);
  x.p = mass_matrix<2>(x.q, 0.0, P) * Vec2(0.3, -0.2);
  auto tau_of = [](double t, const Vec2& qd) {
    return Vec2(Vec2(0.05 * std::sin(t), -0.03 * std::cos(0.7 * t)) - 0.1 * qd);
  };
  auto port = [&](const SystemState<2>& s, const StageEval<2>& ev) -> Vec2 { return tau_of(s.t, ev.dyn.qd); };
  const double dt = 1e-3;
  const double H0 = hamiltonian<2>(x.q, x.p, P);
  double supplied = 0.0;
  double worst = 0.0;
  for (int k = 0; k < 60000; ++k) {
    x.t = k * dt;
    const auto ev = evaluate_stage<2>(x, P);
    PortVariables pv;
    pv.tau = tau_of(x.t, ev.dyn.qd);
    const double w0 = power_balance<2>(x, pv, P);
    const auto next = rk4_step<2>(x, dt, P, port, &ev);
    const auto ev1 = evaluate_stage<2>(next, P);
    const double wm = [&] {
      SystemState<2> mid = x;
      mid.q = 0.5 * (x.q + next.q);
      mid.p = 0.5 * (x.p + next.p);
      const Vec2 qd = mass_matrix<2>(mid.q, 0.0, P).llt().solve(mid.p);
      return qd.dot(tau_of(x.t + 0.5 * dt, qd));
    }();
    const double w1 = ev1.dyn.qd.dot(tau_of(next.t, ev1.dyn.qd));
    supplied += dt / 6.0 * (w0 + 4.0 * wm + w1);
    x = next;
    const double H = hamiltonian<2>(x.q, x.p, P);
    worst = std::max(worst, std::abs(H - H0 - supplied) / std::max(H0, 1.0));
  }
  EXPECT_LT(worst, 1e-5);
}

}  // namespace
}  // namespace dacph
