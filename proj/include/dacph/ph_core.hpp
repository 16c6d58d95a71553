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

/// @file ph_core.hpp
/// @brief Port-Hamiltonian structure x_dot = (J - R) grad H + g u and the
/// split of the momentum equation into a conservative part and the port.
///
/// For a mechanical system with x = [q; p] the interconnection is canonical
/// and every non-conservative effect enters the momentum rows only, so the
/// port collapses to the generalized force tau:
///
///   p_dot + dH/dq = tau = -D(x) q_dot + B(x) u + d.

#pragma once

#include <cmath>
#include <string>

#include "dacph/common.hpp"

namespace dacph {

/// Interconnection J (skew), dissipation R (symmetric PSD) and input map g
/// of a pH system with n configuration coordinates.
class PhStructure {
 public:
  /// Mechanical structure: J = [[0, I], [-I, 0]], R = blkdiag(0, D),
  /// g = [[0, 0], [B, I]] with the generalized input [u; d].
  static PhStructure mechanical(const Eigen::MatrixXd& D, const Eigen::MatrixXd& B) {
    const Eigen::Index n = D.rows();
    if (D.cols() != n || B.rows() != n) {
      throw DimensionError("PhStructure: D must be n x n and B must have n rows");
    }
    const Eigen::Index m = B.cols();
    PhStructure s;
    s.n_ = static_cast<int>(n);
    s.J_ = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    s.J_.topRightCorner(n, n).setIdentity();
    s.J_.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
    s.R_ = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    s.R_.bottomRightCorner(n, n) = 0.5 * (D + D.transpose());
    s.g_ = Eigen::MatrixXd::Zero(2 * n, m + n);
    s.g_.bottomLeftCorner(n, m) = B;
    s.g_.bottomRightCorner(n, n).setIdentity();
    return s;
  }

  /// Conservative structure (R = 0, g = 0).
  static PhStructure conservative(int n) {
    return mechanical(Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n));
  }

  int n() const { return n_; }
  const Eigen::MatrixXd& J() const { return J_; }
  const Eigen::MatrixXd& R() const { return R_; }
  const Eigen::MatrixXd& g() const { return g_; }

  /// Smallest eigenvalue of R; the structure requires it to be >= -1e-12.
  double min_dissipation_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

 private:
  PhStructure() = default;
  int n_ = 0;
  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
  Eigen::MatrixXd g_;
};

/// Port quantities of the momentum equation. The full port Pi = [0; tau]
/// is reconstructed on demand; its configuration block is zero by
/// construction.
struct PortVariables {
  Eigen::VectorXd tau;
  Eigen::VectorXd u;
  Eigen::VectorXd d;

  Eigen::VectorXd Pi() const {
    const Eigen::Index n = tau.size();
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(2 * n);
    pi.tail(n) = tau;
    return pi;
  }
};

/// Extracts Pi = x_dot - J grad H. Throws DimensionError on size mismatch
/// and when the configuration rows of x_dot disagree with dH/dp (which
/// would mean a non-zero configuration port).
inline PortVariables decompose(const Eigen::VectorXd& state_derivative,
                               const Eigen::VectorXd& hamiltonian_gradient,
                               const PhStructure& structure) {
  const Eigen::Index n = structure.n();
  if (state_derivative.size() != 2 * n || hamiltonian_gradient.size() != 2 * n) {
    throw DimensionError("decompose: expected vectors of size " + std::to_string(2 * n) +
                         ", got " + std::to_string(state_derivative.size()) + " and " +
                         std::to_string(hamiltonian_gradient.size()));
  }
  const Eigen::VectorXd pi = state_derivative - structure.J() * hamiltonian_gradient;
  const double scale = 1.0 + state_derivative.head(n).cwiseAbs().maxCoeff();
  if (pi.head(n).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DimensionError("decompose: configuration block of the port is non-zero");
  }
  PortVariables port;
  port.tau = pi.tail(n);
  return port;
}

/// dH/dt = q_dot^T tau for the reduced system.
template <typename Derived1, typename Derived2>
double power_balance(const Eigen::MatrixBase<Derived1>& qd, const Eigen::MatrixBase<Derived2>& tau) {
  return qd.dot(tau);
}

}  // namespace dacph
