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

/// @file truth_plant.hpp
/// @brief Ground-truth actuation/dissipation channel of the two-link robot:
/// tau = B(x) u - D(x) q_dot + d(t), with a phase-dependent uncertainty model.

#pragma once

#include <cmath>
#include <numbers>
#include <string_view>

#include "dacph/common.hpp"

namespace dacph {

enum class Phase : int {
  Warmup = 0,
  LinearUncertainty = 1,
  NonlinearUncertainty = 2,
  Disturbed = 3,
};

inline std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::Warmup: return "warmup";
    case Phase::LinearUncertainty: return "linear";
    case Phase::NonlinearUncertainty: return "nonlinear";
    case Phase::Disturbed: return "disturbed";
  }
  return "unknown";
}

/// Step plus sinusoid, active only in the Disturbed phase.
struct DisturbanceSpec {
  Vec2 step = Vec2(0.2, -0.15);           // N m
  double amplitude = 0.05;                // N m, on both joints
  double frequency = 0.2;                 // Hz
};

/// Coefficients of the uncertainty added after warm-up. Dissipation is
/// diagonal; entry i is
///   d0_i + d1_i p_i + d2_i p_i^2.
/// Input-matrix perturbation:
///   dB_ij = b1_ij q_j + [i == j] b2_i p_i^2 + [i != j] b3_ij q_1^2.
/// Linear terms (d0, d1, b1) are active from LinearUncertainty on; the
/// quadratic ones (d2, b2, b3) from NonlinearUncertainty on.
struct UncertaintyModel {
  Mat2 B_nom = Mat2::Identity();
  Vec2 D_nom = Vec2(0.1, 0.1);
  Vec2 d0 = Vec2(0.02, 0.05);
  Vec2 d1 = Vec2(0.4, 0.4);
  Vec2 d2 = Vec2(-0.05, 0.1);
  Mat2 b1 = (Mat2() << -0.1, 0.0, 0.05, 0.15).finished();
  Vec2 b2 = Vec2(0.15, -0.25);
  Mat2 b3 = (Mat2() << 0.0, -0.1, 0.4, 0.0).finished();
  DisturbanceSpec disturbance{};
};

struct TrueMatrices {
  Mat2 B = Mat2::Identity();
  Mat2 D = Mat2::Zero();
  bool dissipation_floored = false;  // an entry of D was clipped at zero
};

/// True (B, D) at state (q, p) in the given phase.
inline TrueMatrices true_matrices(const Vec2& q, const Vec2& p, Phase phase,
                                  const UncertaintyModel& model = {}) {
  TrueMatrices tm;
  tm.B = model.B_nom;
  Vec2 dvec = model.D_nom;
  if (phase != Phase::Warmup) {
    const bool nonlinear = phase != Phase::LinearUncertainty;
    const Vec2 pp = p.cwiseProduct(p);
    dvec += model.d0 + model.d1.cwiseProduct(p);
    if (nonlinear) dvec += model.d2.cwiseProduct(pp);

    Mat2 dB;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) dB(i, j) = model.b1(i, j) * q(j);
    }
    if (nonlinear) {
      dB.diagonal() += model.b2.cwiseProduct(pp);
      dB += model.b3 * (q(0) * q(0));
    }
    tm.B += dB;
  }
  for (int i = 0; i < 2; ++i) {
    if (dvec(i) < 0.0) {
      dvec(i) = 0.0;
      tm.dissipation_floored = true;
    }
  }
  tm.D = dvec.asDiagonal();
  return tm;
}

/// External disturbance at absolute time t; zero outside the Disturbed phase.
inline Vec2 disturbance(double t, Phase phase, const DisturbanceSpec& spec = {}) {
  if (phase != Phase::Disturbed) return Vec2::Zero();
  const double hf = spec.amplitude * std::sin(2.0 * std::numbers::pi * spec.frequency * t);
  return spec.step + Vec2(hf, hf);
}

/// Generalized force delivered to the conservative dynamics.
inline Vec2 realized_port(const Vec2& u, const Vec2& qd, const TrueMatrices& tm,
                          const Vec2& d) {
  return tm.B * u - tm.D * qd + d;
}

}  // namespace dacph
