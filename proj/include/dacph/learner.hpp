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

/// @file learner.hpp
/// @brief Two-branch estimator of the actuation matrix B(x) and the diagonal
/// dissipation D(x), trained online with hand-written backpropagation and
/// ADAM against the observed port torque.
///
/// Each branch is X -> tanh(16) -> tanh(8) -> linear head. The B head emits
/// n^2 values reshaped row-major; the D head emits n values through softplus
/// so the estimated dissipation is always positive.
///
/// Prediction: tau_hat = B(x) u - D(x) q_dot + offset, loss = mean ||tau_obs - tau_hat||^2.

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include "dacph/common.hpp"
#include "dacph/random.hpp"

namespace dacph {

/// X(x) = [q / pi, p / 2], optionally extended with pairwise products of
/// the normalized state and sin/cos of every joint angle.
struct FeatureMap {
  int n = 2;
  double angle_scale = std::numbers::pi;
  double momentum_scale = 2.0;
  bool expansion = false;

  int dim() const {
    const int base = 2 * n;
    return expansion ? base + base * (base + 1) / 2 + 2 * n : base;
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const {
    Eigen::VectorXd x(dim());
    const int base = 2 * n;
    x.head(n) = q / angle_scale;
    x.segment(n, n) = p / momentum_scale;
    if (expansion) {
      int k = base;
      for (int i = 0; i < base; ++i) {
        for (int j = i; j < base; ++j) x(k++) = x(i) * x(j);
      }
      for (int i = 0; i < n; ++i) {
        x(k++) = std::sin(q(i));
        x(k++) = std::cos(q(i));
      }
    }
    return x;
  }
};

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

struct NetworkShape {
  int input_dim = 4;
  int n = 2;
  int hidden1 = 16;
  int hidden2 = 8;
};

/// Estimates for a batch of inputs plus the activations backprop needs.
struct BatchForward {
  Eigen::MatrixXd X;       // input_dim x batch
  Eigen::MatrixXd hB1, hB2, hD1, hD2;
  Eigen::MatrixXd outB;    // n^2 x batch, row-major B
  Eigen::MatrixXd zD;      // n x batch, pre-softplus
  Eigen::MatrixXd dvals;   // n x batch, D diagonal

  Eigen::MatrixXd B(Eigen::Index k, int n) const {
    Eigen::MatrixXd b(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) b(i, j) = outB(i * n + j, k);
    }
    return b;
  }
};

struct Estimate {
  Eigen::MatrixXd B;
  Eigen::VectorXd D;  // diagonal entries
};

/// Flat parameter vector with layer views. Layout per branch (B then D):
/// W1, b1, W2, b2, Whead, bhead; matrices column-major.
class Network {
 public:
  struct Layer {
    Eigen::Index w = 0, b = 0;
    int rows = 0, cols = 0;
  };

  explicit Network(const NetworkShape& shape = {}) : shape_(shape) {
    Eigen::Index off = 0;
    auto add = [&](int rows, int cols) {
      Layer l{off, off + static_cast<Eigen::Index>(rows) * cols, rows, cols};
      off = l.b + rows;
      return l;
    };
    const int n = shape.n;
    branchB_ = {add(shape.hidden1, shape.input_dim), add(shape.hidden2, shape.hidden1),
                add(n * n, shape.hidden2)};
    branchD_ = {add(shape.hidden1, shape.input_dim), add(shape.hidden2, shape.hidden1),
                add(n, shape.hidden2)};
    theta_ = Eigen::VectorXd::Zero(off);
  }

  const NetworkShape& shape() const { return shape_; }
  Eigen::Index size() const { return theta_.size(); }
  const Eigen::VectorXd& params() const { return theta_; }
  Eigen::VectorXd& params() { return theta_; }
  const std::array<Layer, 3>& branch_b() const { return branchB_; }
  const std::array<Layer, 3>& branch_d() const { return branchD_; }

  Eigen::Map<const Eigen::MatrixXd> W(const Layer& l) const {
    return {theta_.data() + l.w, l.rows, l.cols};
  }
  Eigen::Map<Eigen::MatrixXd> W(const Layer& l) { return {theta_.data() + l.w, l.rows, l.cols}; }
  Eigen::Map<const Eigen::VectorXd> b(const Layer& l) const { return {theta_.data() + l.b, l.rows}; }
  Eigen::Map<Eigen::VectorXd> b(const Layer& l) { return {theta_.data() + l.b, l.rows}; }

  /// Warm start: head biases reproduce (B0, D0) exactly; every weight is
  /// uniform(+-scale / sqrt(fan_in)); hidden biases are zero.
  void initialize(std::uint64_t seed, double scale, const Eigen::MatrixXd& B0,
                  const Eigen::VectorXd& D0) {
    const int n = shape_.n;
    if (B0.rows() != n || B0.cols() != n || D0.size() != n) {
      throw DimensionError("Network::initialize: nominal matrices have the wrong size");
    }
    theta_.setZero();
    const CounterRng rng(seed, 0x1417);
    std::uint64_t counter = 0;
    for (const auto* branch : {&branchB_, &branchD_}) {
      for (const auto& l : *branch) {
        const double bound = scale / std::sqrt(static_cast<double>(l.cols));
        auto w = W(l);
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
          for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(counter++, -bound, bound);
        }
      }
    }
    auto bB = b(branchB_[2]);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) bB(i * n + j) = B0(i, j);
    }
    auto bD = b(branchD_[2]);
    for (int i = 0; i < n; ++i) bD(i) = softplus_inverse(D0(i));
  }

  /// Sets every weight matrix to zero, leaving only biases.
  void zero_weights() {
    for (const auto* branch : {&branchB_, &branchD_}) {
      for (const auto& l : *branch) W(l).setZero();
    }
  }

  BatchForward forward_batch(const Eigen::MatrixXd& X) const {
    if (X.rows() != shape_.input_dim) throw DimensionError("Network: feature size mismatch");
    BatchForward f;
    f.X = X;
    auto hidden = [&](const std::array<Layer, 3>& br, Eigen::MatrixXd& h1, Eigen::MatrixXd& h2) {
      h1 = ((W(br[0]) * X).colwise() + b(br[0])).array().tanh().matrix();
      h2 = ((W(br[1]) * h1).colwise() + b(br[1])).array().tanh().matrix();
    };
    hidden(branchB_, f.hB1, f.hB2);
    hidden(branchD_, f.hD1, f.hD2);
    f.outB = (W(branchB_[2]) * f.hB2).colwise() + b(branchB_[2]);
    f.zD = (W(branchD_[2]) * f.hD2).colwise() + b(branchD_[2]);
    f.dvals = f.zD.unaryExpr([](double z) { return softplus(z); });
    if (!f.outB.allFinite() || !f.dvals.allFinite()) {
      throw NumericAbort("Network: non-finite estimate");
    }
    return f;
  }

  Estimate forward(const Eigen::VectorXd& X) const {
    const auto f = forward_batch(X);
    return {f.B(0, shape_.n), f.dvals.col(0)};
  }

 private:
  NetworkShape shape_;
  std::array<Layer, 3> branchB_{};
  std::array<Layer, 3> branchD_{};
  Eigen::VectorXd theta_;
};

/// One training pair: features, applied input, joint rates, observed port.
/// offset is a known additive port term (the disturbance when it is fed
/// through); empty means zero.
struct ReplaySample {
  Eigen::VectorXd X;
  Eigen::VectorXd u;
  Eigen::VectorXd qdot;
  Eigen::VectorXd tau_obs;
  double t = 0.0;
  Eigen::VectorXd offset{};
};

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Mean squared port-prediction error over the batch and its gradient with
/// respect to the flat parameter vector.
inline LossGradient loss_and_gradients(const Network& net, const std::vector<const ReplaySample*>& batch) {
  if (batch.empty()) throw DimensionError("loss_and_gradients: empty batch");
  const auto& shape = net.shape();
  const int n = shape.n;
  const Eigen::Index m = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd X(shape.input_dim, m), U(n, m), QD(n, m), T(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    X.col(k) = batch[k]->X;
    U.col(k) = batch[k]->u;
    QD.col(k) = batch[k]->qdot;
    T.col(k) = batch[k]->tau_obs;
    if (batch[k]->offset.size() == n) T.col(k) -= batch[k]->offset;
  }
  const BatchForward f = net.forward_batch(X);

  Eigen::MatrixXd R(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (int i = 0; i < n; ++i) {
      double bu = 0.0;
      for (int j = 0; j < n; ++j) bu += f.outB(i * n + j, k) * U(j, k);
      R(i, k) = T(i, k) - (bu - f.dvals(i, k) * QD(i, k));
    }
  }
  LossGradient out;
  out.loss = R.squaredNorm() / static_cast<double>(m);
  out.grad = Eigen::VectorXd::Zero(net.size());

  const double inv_m = 1.0 / static_cast<double>(m);
  Eigen::MatrixXd gB(n * n, m), gZ(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) gB(i * n + j, k) = -2.0 * R(i, k) * U(j, k) * inv_m;
      gZ(i, k) = 2.0 * R(i, k) * QD(i, k) * sigmoid(f.zD(i, k)) * inv_m;
    }
  }

  auto backprop = [&](const std::array<Network::Layer, 3>& br, const Eigen::MatrixXd& h1,
                      const Eigen::MatrixXd& h2, const Eigen::MatrixXd& g_out) {
    auto grad_w = [&](const Network::Layer& l) {
      return Eigen::Map<Eigen::MatrixXd>(out.grad.data() + l.w, l.rows, l.cols);
    };
    auto grad_b = [&](const Network::Layer& l) {
      return Eigen::Map<Eigen::VectorXd>(out.grad.data() + l.b, l.rows);
    };
    grad_w(br[2]) = g_out * h2.transpose();
    grad_b(br[2]) = g_out.rowwise().sum();
    const Eigen::MatrixXd dA2 =
        ((net.W(br[2]).transpose() * g_out).array() * (1.0 - h2.array().square())).matrix();
    grad_w(br[1]) = dA2 * h1.transpose();
    grad_b(br[1]) = dA2.rowwise().sum();
    const Eigen::MatrixXd dA1 =
        ((net.W(br[1]).transpose() * dA2).array() * (1.0 - h1.array().square())).matrix();
    grad_w(br[0]) = dA1 * X.transpose();
    grad_b(br[0]) = dA1.rowwise().sum();
  };
  backprop(net.branch_b(), f.hB1, f.hB2, gB);
  backprop(net.branch_d(), f.hD1, f.hD2, gZ);
  return out;
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(Eigen::Index size, const AdamConfig& config = {})
      : config_(config), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    params.array() -= config_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
  }

  std::int64_t steps() const { return t_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }
  const AdamConfig& config() const { return config_; }

  void restore(std::int64_t steps, const Eigen::VectorXd& m, const Eigen::VectorXd& v) {
    if (m.size() != m_.size() || v.size() != v_.size()) throw DimensionError("Adam::restore: size mismatch");
    t_ = steps;
    m_ = m;
    v_ = v;
  }

 private:
  AdamConfig config_;
  Eigen::VectorXd m_, v_;
  std::int64_t t_ = 0;
};

/// Fixed-capacity FIFO of training samples.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 256) : capacity_(capacity) { data_.reserve(capacity); }

  void push(ReplaySample s) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(s));
    } else {
      data_[head_] = std::move(s);
      head_ = (head_ + 1) % capacity_;
    }
  }
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// i = 0 is the oldest sample.
  const ReplaySample& operator[](std::size_t i) const { return data_[(head_ + i) % data_.size()]; }

 private:
  std::size_t capacity_;
  std::vector<ReplaySample> data_;
  std::size_t head_ = 0;
};

struct LearnerConfig {
  AdamConfig adam{.lr = 1e-4};
  std::size_t batch_size = 32;
  std::size_t buffer_size = 256;
  bool feature_expansion = false;
  std::uint64_t seed = 7;
  double init_scale = 0.1;
  Eigen::MatrixXd initial_B = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd initial_D = Eigen::VectorXd::Constant(2, 0.1);
  bool enabled = true;
};

/// Network, optimizer and replay buffer stepped at the learning rate.
class OnlineLearner {
 public:
  OnlineLearner(int n, const LearnerConfig& config)
      : config_(config),
        features_{n, std::numbers::pi, 2.0, config.feature_expansion},
        net_(NetworkShape{features_.dim(), n}),
        adam_(net_.size(), config.adam),
        buffer_(config.buffer_size),
        rng_(config.seed, 0xB47C) {
    net_.initialize(config.seed, config.init_scale, config.initial_B, config.initial_D);
  }

  const FeatureMap& features() const { return features_; }
  const Network& network() const { return net_; }
  Network& network() { return net_; }
  const Adam& optimizer() const { return adam_; }
  Adam& optimizer() { return adam_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  double last_loss() const { return last_loss_; }

  Estimate estimate(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const {
    return net_.forward(features_(q, p));
  }

  void record(ReplaySample s) { buffer_.push(std::move(s)); }

  /// One ADAM step on a uniformly drawn mini-batch (with replacement).
  /// Returns nothing while the buffer holds fewer than batch_size samples.
  std::optional<double> update() {
    if (!config_.enabled || buffer_.size() < config_.batch_size) return std::nullopt;
    std::vector<const ReplaySample*> batch(config_.batch_size);
    for (auto& b : batch) b = &buffer_[rng_.below(draws_++, buffer_.size())];
    const auto lg = loss_and_gradients(net_, batch);
    adam_.step(net_.params(), lg.grad);
    if (!net_.params().allFinite()) throw NumericAbort("learner: non-finite parameters");
    last_loss_ = lg.loss;
    return lg.loss;
  }

 private:
  LearnerConfig config_;
  FeatureMap features_;
  Network net_;
  Adam adam_;
  ReplayBuffer buffer_;
  CounterRng rng_;
  std::uint64_t draws_ = 0;
  double last_loss_ = 0.0;
};

// Checkpoint layout (little-endian):
//   char[8]  magic "DACPHNN\0"
//   uint32   format version (1)
//   uint32   n, input_dim, hidden1, hidden2
//   uint64   parameter count P
//   int64    optimizer step count
//   double   params[P], adam_m[P], adam_v[P]
inline constexpr char kCheckpointMagic[8] = {'D', 'A', 'C', 'P', 'H', 'N', 'N', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {
template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("checkpoint: truncated stream");
  return v;
}
}  // namespace detail

inline void save_checkpoint(std::ostream& os, const Network& net, const Adam& adam) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod(os, kCheckpointVersion);
  const auto& s = net.shape();
  for (int v : {s.n, s.input_dim, s.hidden1, s.hidden2}) detail::write_pod(os, static_cast<std::uint32_t>(v));
  detail::write_pod(os, static_cast<std::uint64_t>(net.size()));
  detail::write_pod(os, static_cast<std::int64_t>(adam.steps()));
  const auto bytes = static_cast<std::streamsize>(net.size() * sizeof(double));
  os.write(reinterpret_cast<const char*>(net.params().data()), bytes);
  os.write(reinterpret_cast<const char*>(adam.first_moment().data()), bytes);
  os.write(reinterpret_cast<const char*>(adam.second_moment().data()), bytes);
}

inline void load_checkpoint(std::istream& is, Network& net, Adam& adam) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error("checkpoint: bad magic");
  }
  if (detail::read_pod<std::uint32_t>(is) != kCheckpointVersion) throw Error("checkpoint: unsupported version");
  const auto& s = net.shape();
  for (int v : {s.n, s.input_dim, s.hidden1, s.hidden2}) {
    if (detail::read_pod<std::uint32_t>(is) != static_cast<std::uint32_t>(v)) {
      throw DimensionError("checkpoint: network shape mismatch");
    }
  }
  if (detail::read_pod<std::uint64_t>(is) != static_cast<std::uint64_t>(net.size())) {
    throw DimensionError("checkpoint: parameter count mismatch");
  }
  const auto steps = detail::read_pod<std::int64_t>(is);
  Eigen::VectorXd p(net.size()), m(net.size()), v(net.size());
  const auto bytes = static_cast<std::streamsize>(net.size() * sizeof(double));
  for (auto* vec : {&p, &m, &v}) {
    if (!is.read(reinterpret_cast<char*>(vec->data()), bytes)) throw Error("checkpoint: truncated stream");
  }
  net.params() = p;
  adam.restore(steps, m, v);
}

}  // namespace dacph
