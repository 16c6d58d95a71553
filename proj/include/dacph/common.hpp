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

/// @file common.hpp
/// @brief Eigen aliases and the error hierarchy shared by every module.

#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dacph {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int R, int C>
using Mat = Eigen::Matrix<double, R, C>;
template <int N>
using RowVec = Eigen::Matrix<double, 1, N>;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs whose sizes disagree with the structure they are applied to.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The task row of the generalized Jacobian has (numerically) lost rank.
class DynamicSingularity : public Error {
 public:
  using Error::Error;
};

/// Gain synthesis preconditions failed (DIC violated or unstable mode).
/// Callers keep the previously committed gains.
class GainFreeze : public Error {
 public:
  using Error::Error;
};

/// Non-finite quantity inside the closed loop.
class NumericAbort : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration; the message carries the offending key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Planar cross product a × b (z component).
inline double cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

/// Rotates a planar vector by +90 degrees: ω × r for unit ω about z.
inline Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

inline Vec2 unit(double angle) { return Vec2(std::cos(angle), std::sin(angle)); }

}  // namespace dacph
