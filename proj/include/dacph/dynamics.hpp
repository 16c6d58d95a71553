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

/// @file dynamics.hpp
/// @brief Planar free-floating serial chain: momentum constraint, generalized
/// Jacobian, reduced mass matrix, Coriolis terms and the Hamiltonian.
///
/// Geometry: body 0 is the base with its centre of mass at r0 and attitude
/// theta0. Joint 1 sits at distance `mount_offset` from the base centre of
/// mass along the base x axis. Links are uniform rods with their centre of
/// mass at the midpoint; joint k+1 sits at the distal end of link k and the
/// end effector at the distal end of link N. Absolute link angles are
/// theta0 + q1 + ... + qk.
///
/// All velocities are planar spatial velocities ordered (x_dot, y_dot, omega).

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "dacph/common.hpp"

namespace dacph {

struct BodyParams {
  double mass = 0.0;     // kg
  double length = 0.0;   // m
  double inertia = 0.0;  // kg m^2, about the body centre of mass
};

/// Mass properties of the base (index 0) and the N links.
template <int N>
struct RobotParams {
  std::array<BodyParams, N + 1> bodies{};
  double mount_offset = 0.0;  // base COM to joint-1 axis, m

  void validate() const {
    for (std::size_t k = 0; k < bodies.size(); ++k) {
      const auto& b = bodies[k];
      if (!(b.mass > 0.0) || !(b.length > 0.0) || !(b.inertia > 0.0)) {
        throw ConfigError("robot.bodies[" + std::to_string(k) +
                          "]: mass, length and inertia must be positive");
      }
    }
    if (!(mount_offset >= 0.0)) {
      throw ConfigError("robot.mount_offset: must be non-negative");
    }
  }

  double total_mass() const {
    double m = 0.0;
    for (const auto& b : bodies) m += b.mass;
    return m;
  }
  double total_inertia() const {
    double i = 0.0;
    for (const auto& b : bodies) i += b.inertia;
    return i;
  }
};

/// Two-link reference robot: base (2, 0.1225, 0.02), links (1, 0.3464, 0.01).
inline RobotParams<2> reference_robot() {
  RobotParams<2> params;
  params.bodies = {BodyParams{2.0, 0.1225, 0.02}, BodyParams{1.0, 0.3464, 0.01},
                   BodyParams{1.0, 0.3464, 0.01}};
  params.mount_offset = 0.1225;
  return params;
}

/// Joint coordinates q, generalized momenta p = M(q) q_dot, and the
/// integrated base pose. The base pose is path dependent (nonholonomic).
template <int N>
struct SystemState {
  Vec<N> q = Vec<N>::Zero();
  Vec<N> p = Vec<N>::Zero();
  Vec2 r0 = Vec2::Zero();
  double theta0 = 0.0;
  double t = 0.0;
};

/// Point positions relative to the base centre of mass.
template <int N>
struct ChainGeometry {
  std::array<Vec2, N + 1> com{};     // body centres of mass, com[0] = 0
  std::array<Vec2, N> joint{};       // joint axes, joint[0] is the mount point
  std::array<double, N + 1> angle{};  // absolute body angles
  Vec2 tip = Vec2::Zero();           // end effector
  Vec2 system_com = Vec2::Zero();
};

template <int N>
ChainGeometry<N> chain_geometry(const Vec<N>& q, double theta0,
                                const RobotParams<N>& params) {
  ChainGeometry<N> g;
  g.com[0] = Vec2::Zero();
  g.angle[0] = theta0;
  Vec2 joint = params.mount_offset * unit(theta0);
  double phi = theta0;
  for (int i = 0; i < N; ++i) {
    phi += q(i);
    const double len = params.bodies[i + 1].length;
    const Vec2 dir = unit(phi);
    g.joint[i] = joint;
    g.angle[i + 1] = phi;
    g.com[i + 1] = joint + 0.5 * len * dir;
    joint += len * dir;
  }
  g.tip = joint;
  double mass = 0.0;
  for (int k = 0; k <= N; ++k) {
    g.system_com += params.bodies[k].mass * g.com[k];
    mass += params.bodies[k].mass;
  }
  g.system_com /= mass;
  return g;
}

/// Per-body maps v_k = H_k q0_dot + J_k q_dot.
template <int N>
struct BodyJacobians {
  std::array<Mat3, N + 1> H{};
  std::array<Mat<3, N>, N + 1> J{};
};

template <int N>
BodyJacobians<N> body_jacobians(const ChainGeometry<N>& g) {
  BodyJacobians<N> bj;
  for (int k = 0; k <= N; ++k) {
    Mat3& H = bj.H[k];
    H.setIdentity();
    H.template block<2, 1>(0, 2) = perp(g.com[k]);
    Mat<3, N>& J = bj.J[k];
    J.setZero();
    for (int i = 0; i < k; ++i) {
      J.template block<2, 1>(0, i) = perp(g.com[k] - g.joint[i]);
      J(2, i) = 1.0;
    }
  }
  return bj;
}

/// Momentum constraint Hq0 q0_dot + Hq q_dot = 0. Rows 0-1 are linear
/// momentum, row 2 is angular momentum about the instantaneous system COM.
template <int N>
struct ConstraintMatrices {
  Mat3 Hq0 = Mat3::Zero();
  Mat<3, N> Hq = Mat<3, N>::Zero();
};

namespace detail {

// Row contribution of one body's velocity map to (h_L, h_A).
template <int C>
Mat<3, C> momentum_rows(const Mat<3, C>& vel_map, const BodyParams& body,
                        const Vec2& r_rel) {
  Mat<3, C> rows;
  rows.template topRows<2>() = body.mass * vel_map.template topRows<2>();
  rows.row(2) = body.inertia * vel_map.row(2) +
                body.mass * (r_rel.x() * vel_map.row(1) - r_rel.y() * vel_map.row(0));
  return rows;
}

template <int N>
ConstraintMatrices<N> assemble_constraint(const ChainGeometry<N>& g,
                                          const BodyJacobians<N>& bj,
                                          const RobotParams<N>& params) {
  ConstraintMatrices<N> cm;
  for (int k = 0; k <= N; ++k) {
    const Vec2 r_rel = g.com[k] - g.system_com;
    cm.Hq0 += momentum_rows<3>(bj.H[k], params.bodies[k], r_rel);
    cm.Hq += momentum_rows<N>(bj.J[k], params.bodies[k], r_rel);
  }
  return cm;
}

inline constexpr double kMinConstraintDet = 1e-9;

}  // namespace detail

template <int N>
ConstraintMatrices<N> constraint_matrices(const Vec<N>& q, double theta0,
                                          const RobotParams<N>& params) {
  const auto g = chain_geometry<N>(q, theta0, params);
  return detail::assemble_constraint<N>(g, body_jacobians<N>(g), params);
}

/// Joint velocities to inertial link velocities with momentum conservation
/// built in. gjm[0] is the base, gjm[N] the last link.
template <int N>
struct KinematicsBundle {
  Mat3 Hq0 = Mat3::Zero();
  Mat<3, N> Hq = Mat<3, N>::Zero();
  Mat<3, N> base_map = Mat<3, N>::Zero();  // q0_dot = base_map * q_dot
  std::array<Mat<3, N>, N + 1> gjm{};
  RowVec<N> task_row = RowVec<N>::Zero();  // alpha_dot = task_row * q_dot
};

template <int N>
KinematicsBundle<N> generalized_jacobian(const Vec<N>& q, double theta0,
                                         const RobotParams<N>& params) {
  const auto g = chain_geometry<N>(q, theta0, params);
  const auto bj = body_jacobians<N>(g);
  const auto cm = detail::assemble_constraint<N>(g, bj, params);
  const double det = cm.Hq0.determinant();
  if (!(std::abs(det) > detail::kMinConstraintDet)) {
    throw NumericAbort("momentum constraint: locked inertia matrix is singular (det = " +
                       std::to_string(det) + ")");
  }
  KinematicsBundle<N> kb;
  kb.Hq0 = cm.Hq0;
  kb.Hq = cm.Hq;
  kb.base_map = -cm.Hq0.partialPivLu().solve(cm.Hq);
  for (int k = 0; k <= N; ++k) {
    kb.gjm[k] = bj.J[k] + bj.H[k] * kb.base_map;
  }
  kb.task_row = kb.gjm[N].row(2);
  return kb;
}

/// Base twist (x0_dot, y0_dot, omega0) that keeps total momentum at zero.
template <int N>
Vec3 base_velocity(const Vec<N>& q, const Vec<N>& qd, double theta0,
                   const RobotParams<N>& params) {
  return generalized_jacobian<N>(q, theta0, params).base_map * qd;
}

template <int N>
Mat<N, N> mass_matrix(const KinematicsBundle<N>& kb, const RobotParams<N>& params) {
  Mat<N, N> M = Mat<N, N>::Zero();
  for (int k = 0; k <= N; ++k) {
    const auto& Jb = kb.gjm[k];
    const auto Jv = Jb.template topRows<2>();
    const auto Jw = Jb.row(2);
    M.noalias() += params.bodies[k].mass * Jv.transpose() * Jv;
    M.noalias() += params.bodies[k].inertia * Jw.transpose() * Jw;
  }
  return 0.5 * (M + M.transpose());
}

/// Reduced mass matrix. Independent of theta0; the argument exists so that
/// callers can evaluate at the actual attitude.
template <int N>
Mat<N, N> mass_matrix(const Vec<N>& q, double theta0, const RobotParams<N>& params) {
  return mass_matrix<N>(generalized_jacobian<N>(q, theta0, params), params);
}

template <int N>
using MassDerivatives = std::array<Mat<N, N>, N>;

inline constexpr double kMassDerivativeStep = 1e-6;

/// dM/dq_i by central differences.
template <int N>
MassDerivatives<N> mass_matrix_derivatives(const Vec<N>& q, const RobotParams<N>& params,
                                           double h = kMassDerivativeStep) {
  MassDerivatives<N> d;
  for (int i = 0; i < N; ++i) {
    Vec<N> qp = q, qm = q;
    qp(i) += h;
    qm(i) -= h;
    d[i] = (mass_matrix<N>(qp, 0.0, params) - mass_matrix<N>(qm, 0.0, params)) / (2.0 * h);
  }
  return d;
}

/// Christoffel-symbol Coriolis matrix C(q, q_dot).
template <int N>
Mat<N, N> coriolis_matrix(const Vec<N>& qd, const MassDerivatives<N>& dM) {
  Mat<N, N> C = Mat<N, N>::Zero();
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      double c = 0.0;
      for (int k = 0; k < N; ++k) {
        c += 0.5 * (dM[k](i, j) + dM[j](i, k) - dM[i](j, k)) * qd(k);
      }
      C(i, j) = c;
    }
  }
  return C;
}

template <int N>
Mat<N, N> coriolis_matrix(const Vec<N>& q, const Vec<N>& qd, const RobotParams<N>& params) {
  return coriolis_matrix<N>(qd, mass_matrix_derivatives<N>(q, params));
}

/// M_dot = sum_i dM/dq_i q_dot_i.
template <int N>
Mat<N, N> mass_matrix_rate(const Vec<N>& qd, const MassDerivatives<N>& dM) {
  Mat<N, N> Md = Mat<N, N>::Zero();
  for (int i = 0; i < N; ++i) Md += dM[i] * qd(i);
  return Md;
}

/// M, its configuration derivatives, and C'(q, p) = C(q, M^-1 p).
template <int N>
struct DynamicsMatrices {
  Mat<N, N> M = Mat<N, N>::Zero();
  MassDerivatives<N> dMdq{};
  Mat<N, N> C = Mat<N, N>::Zero();
  Vec<N> qd = Vec<N>::Zero();
};

template <int N>
DynamicsMatrices<N> dynamics_matrices(const Vec<N>& q, const Vec<N>& p,
                                      const RobotParams<N>& params) {
  DynamicsMatrices<N> dm;
  dm.M = mass_matrix<N>(q, 0.0, params);
  dm.dMdq = mass_matrix_derivatives<N>(q, params);
  dm.qd = dm.M.llt().solve(p);
  dm.C = coriolis_matrix<N>(dm.qd, dm.dMdq);
  return dm;
}

template <int N>
Mat<N, N> coriolis_prime(const Vec<N>& q, const Vec<N>& p, const RobotParams<N>& params) {
  return dynamics_matrices<N>(q, p, params).C;
}

template <int N>
double hamiltonian(const Vec<N>& q, const Vec<N>& p, const RobotParams<N>& params) {
  const Mat<N, N> M = mass_matrix<N>(q, 0.0, params);
  return 0.5 * p.dot(M.llt().solve(p));
}

/// dH/dq_i = -1/2 q_dot^T (dM/dq_i) q_dot with q_dot = M^-1 p.
template <int N>
Vec<N> dH_dq(const Vec<N>& qd, const MassDerivatives<N>& dM) {
  Vec<N> g;
  for (int i = 0; i < N; ++i) g(i) = -0.5 * qd.dot(dM[i] * qd);
  return g;
}

template <int N>
Vec<N> dH_dq(const Vec<N>& q, const Vec<N>& p, const RobotParams<N>& params) {
  const auto dm = dynamics_matrices<N>(q, p, params);
  return dH_dq<N>(dm.qd, dm.dMdq);
}

/// -(M_dot - C') M^-1 p; equals dH_dq when C' is the Christoffel form.
template <int N>
Vec<N> dH_dq_from_coriolis(const DynamicsMatrices<N>& dm) {
  return -(mass_matrix_rate<N>(dm.qd, dm.dMdq) - dm.C) * dm.qd;
}

/// Total linear momentum and angular momentum about the system COM for the
/// given joint rates and base twist.
struct MomentumResidual {
  Vec2 linear = Vec2::Zero();
  double angular = 0.0;
};

template <int N>
MomentumResidual system_momentum(const Vec<N>& q, const Vec<N>& qd, double theta0,
                                 const Vec3& base_twist, const RobotParams<N>& params) {
  const auto g = chain_geometry<N>(q, theta0, params);
  const auto bj = body_jacobians<N>(g);
  MomentumResidual h;
  for (int k = 0; k <= N; ++k) {
    const Vec3 v = bj.H[k] * base_twist + bj.J[k] * qd;
    const auto& b = params.bodies[k];
    h.linear += b.mass * v.template head<2>();
    h.angular += b.inertia * v(2) + b.mass * cross2(g.com[k] - g.system_com, v.template head<2>());
  }
  return h;
}

/// Infimum and supremum eigenvalues of M over a uniform grid in [-pi, pi]^N.
struct EigenBounds {
  double min = 0.0;
  double max = 0.0;
};

template <int N>
EigenBounds mass_eigen_bounds(const RobotParams<N>& params, int points_per_axis = 100) {
  EigenBounds b{std::numeric_limits<double>::infinity(), 0.0};
  std::array<int, N> idx{};
  const double step = 2.0 * std::numbers::pi / (points_per_axis - 1);
  while (true) {
    Vec<N> q;
    for (int i = 0; i < N; ++i) q(i) = -std::numbers::pi + step * idx[i];
    Eigen::SelfAdjointEigenSolver<Mat<N, N>> es(mass_matrix<N>(q, 0.0, params),
                                                Eigen::EigenvaluesOnly);
    b.min = std::min(b.min, es.eigenvalues()(0));
    b.max = std::max(b.max, es.eigenvalues()(N - 1));
    int d = 0;
    while (d < N && ++idx[d] == points_per_axis) idx[d++] = 0;
    if (d == N) break;
  }
  return b;
}

/// End-effector attitude alpha = theta0 + sum(q).
template <int N>
double end_effector_angle(const Vec<N>& q, double theta0) {
  return theta0 + q.sum();
}

}  // namespace dacph
