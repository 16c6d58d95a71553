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

/// @file config.hpp
/// @brief JSON form of ScenarioConfig.
///
/// Every key is optional and overrides the built-in default. Comments are
/// accepted. Unknown keys and type errors are reported with the JSON
/// pointer of the offending value. One field list drives both reading and
/// writing, so an echoed config reloads to the same ScenarioConfig.

#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "dacph/sim_engine.hpp"

namespace dacph {

using Json = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path, const std::string& what) {
  throw ConfigError((path.empty() ? std::string("/") : path) + ": " + what);
}

template <typename E>
struct EnumNames;

template <>
struct EnumNames<ControlMode> {
  static const std::map<std::string, ControlMode>& map() {
    static const std::map<std::string, ControlMode> m{{"dac", ControlMode::DAC}, {"baseline", ControlMode::Baseline}};
    return m;
  }
};
template <>
struct EnumNames<RobustTerm> {
  static const std::map<std::string, RobustTerm>& map() {
    static const std::map<std::string, RobustTerm> m{{"tanh", RobustTerm::Tanh}, {"sign", RobustTerm::Sign}};
    return m;
  }
};
template <>
struct EnumNames<IntegratorKind> {
  static const std::map<std::string, IntegratorKind>& map() {
    static const std::map<std::string, IntegratorKind> m{{"euler", IntegratorKind::Euler},
                                                         {"trapezoidal", IntegratorKind::Trapezoidal}};
    return m;
  }
};

template <typename E>
concept NamedEnum = requires { EnumNames<E>::map(); };

// Decoding.

inline void decode(const Json& j, double& v, const std::string& path) {
  if (!j.is_number()) config_fail(path, "expected a number");
  v = j.get<double>();
}

inline void decode(const Json& j, bool& v, const std::string& path) {
  if (!j.is_boolean()) config_fail(path, "expected true or false");
  v = j.get<bool>();
}

template <typename I>
  requires(std::is_integral_v<I> && !std::is_same_v<I, bool>)
void decode(const Json& j, I& v, const std::string& path) {
  if (!j.is_number_integer()) config_fail(path, "expected an integer");
  if constexpr (std::is_unsigned_v<I>) {
    if (j.is_number_unsigned()) {
      v = static_cast<I>(j.get<std::uint64_t>());
      return;
    }
    if (j.get<std::int64_t>() < 0) config_fail(path, "expected a non-negative integer");
  }
  v = static_cast<I>(j.get<std::int64_t>());
}

template <NamedEnum E>
void decode(const Json& j, E& v, const std::string& path) {
  if (!j.is_string()) config_fail(path, "expected a string");
  const auto& m = EnumNames<E>::map();
  const auto it = m.find(j.get<std::string>());
  if (it == m.end()) {
    std::string opts;
    for (const auto& [k, _] : m) opts += (opts.empty() ? "" : ", ") + k;
    config_fail(path, "unknown value '" + j.get<std::string>() + "' (expected one of: " + opts + ")");
  }
  v = it->second;
}

template <typename Scalar, int R, int C, int O, int MR, int MC>
void decode(const Json& j, Eigen::Matrix<Scalar, R, C, O, MR, MC>& v, const std::string& path) {
  if (!j.is_array()) config_fail(path, "expected an array");
  if constexpr (C == 1) {
    if (R != Eigen::Dynamic && j.size() != static_cast<std::size_t>(R)) {
      config_fail(path, "expected " + std::to_string(R) + " entries");
    }
    v.resize(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) decode(j[i], v(static_cast<Eigen::Index>(i)), path + "/" + std::to_string(i));
  } else {
    if (R != Eigen::Dynamic && j.size() != static_cast<std::size_t>(R)) {
      config_fail(path, "expected " + std::to_string(R) + " rows");
    }
    const std::size_t rows = j.size();
    const std::size_t cols = rows ? (j[0].is_array() ? j[0].size() : 0) : 0;
    v.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string rp = path + "/" + std::to_string(r);
      if (!j[r].is_array() || j[r].size() != cols) config_fail(rp, "rows must be arrays of equal length");
      if (C != Eigen::Dynamic && cols != static_cast<std::size_t>(C)) {
        config_fail(rp, "expected " + std::to_string(C) + " columns");
      }
      for (std::size_t c = 0; c < cols; ++c) {
        decode(j[r][c], v(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)), rp + "/" + std::to_string(c));
      }
    }
  }
}

template <std::size_t K>
void decode(const Json& j, std::array<double, K>& v, const std::string& path) {
  if (!j.is_array() || j.size() != K) config_fail(path, "expected an array of " + std::to_string(K) + " numbers");
  for (std::size_t i = 0; i < K; ++i) decode(j[i], v[i], path + "/" + std::to_string(i));
}

// Encoding.

inline Json encode(double v) { return v; }
inline Json encode(bool v) { return v; }
template <typename I>
  requires(std::is_integral_v<I> && !std::is_same_v<I, bool>)
Json encode(I v) {
  return v;
}
template <NamedEnum E>
Json encode(E v) {
  for (const auto& [k, e] : EnumNames<E>::map()) {
    if (e == v) return k;
  }
  return nullptr;
}
template <typename Scalar, int R, int C, int O, int MR, int MC>
Json encode(const Eigen::Matrix<Scalar, R, C, O, MR, MC>& v) {
  Json out = Json::array();
  if constexpr (C == 1) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  } else {
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < v.cols(); ++c) row.push_back(v(r, c));
      out.push_back(row);
    }
  }
  return out;
}
template <std::size_t K>
Json encode(const std::array<double, K>& v) {
  return Json(v);
}

}  // namespace detail

/// Reads fields out of one JSON object and rejects keys nobody asked for.
class ConfigReader {
 public:
  ConfigReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) detail::config_fail(path_, "expected an object");
  }

  template <typename T>
  void field(const char* key, T& v) {
    seen_.insert(key);
    if (const auto it = j_.find(key); it != j_.end()) detail::decode(*it, v, path_ + "/" + key);
  }

  template <typename F>
  void object(const char* key, F&& f) {
    seen_.insert(key);
    if (const auto it = j_.find(key); it != j_.end()) {
      ConfigReader sub(*it, path_ + "/" + key);
      f(sub);
      sub.finish();
    }
  }

  /// Array of objects; elements start from default-constructed values.
  template <typename T, typename F>
  void list(const char* key, std::vector<T>& v, F&& f) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    const std::string p = path_ + "/" + key;
    if (!it->is_array()) detail::config_fail(p, "expected an array");
    v.assign(it->size(), T{});
    for (std::size_t i = 0; i < it->size(); ++i) {
      ConfigReader sub((*it)[i], p + "/" + std::to_string(i));
      f(sub, v[i]);
      sub.finish();
    }
  }

  /// Fixed-length array of objects.
  template <typename T, std::size_t K, typename F>
  void list(const char* key, std::array<T, K>& v, F&& f) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    const std::string p = path_ + "/" + key;
    if (!it->is_array() || it->size() != K) detail::config_fail(p, "expected an array of " + std::to_string(K) + " objects");
    for (std::size_t i = 0; i < K; ++i) {
      ConfigReader sub((*it)[i], p + "/" + std::to_string(i));
      f(sub, v[i]);
      sub.finish();
    }
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) detail::config_fail(path_ + "/" + key, "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Writes the same fields back out.
class ConfigWriter {
 public:
  template <typename T>
  void field(const char* key, T& v) {
    j_[key] = detail::encode(v);
  }

  template <typename F>
  void object(const char* key, F&& f) {
    ConfigWriter sub;
    f(sub);
    j_[key] = std::move(sub.j_);
  }

  template <typename C, typename F>
  void list(const char* key, C& v, F&& f) {
    Json arr = Json::array();
    for (auto& e : v) {
      ConfigWriter sub;
      f(sub, e);
      arr.push_back(std::move(sub.j_));
    }
    j_[key] = std::move(arr);
  }

  Json& json() { return j_; }

 private:
  Json j_ = Json::object();
};

/// The single field list shared by reading and writing.
template <typename V>
void visit_config(V& v, ScenarioConfig& c) {
  int version = kConfigVersion;
  v.field("version", version);
  if (version != kConfigVersion) detail::config_fail("/version", "unsupported config version " + std::to_string(version));
  v.field("mode", c.mode);
  v.field("seed", c.seed);
  v.field("warmup", c.warmup);
  v.field("phase_durations", c.phase_durations);
  v.object("rates", [&](auto& r) {
    r.field("plant_hz", c.rates.plant_hz);
    r.field("lhs_hz", c.rates.lhs_hz);
    r.field("learn_hz", c.rates.learn_hz);
    r.field("gain_hz", c.rates.gain_hz);
    r.field("log_every", c.rates.log_every);
  });
  v.object("initial", [&](auto& r) {
    r.field("q", c.initial.q);
    r.field("p", c.initial.p);
    r.field("r0", c.initial.r0);
    r.field("theta0", c.initial.theta0);
    r.field("system_momentum", c.initial.system_momentum);
  });
  v.object("robot", [&](auto& r) {
    r.list("bodies", c.robot.bodies, [](auto& b, BodyParams& body) {
      b.field("mass", body.mass);
      b.field("length", body.length);
      b.field("inertia", body.inertia);
    });
    r.field("mount_offset", c.robot.mount_offset);
  });
  v.object("lhs", [&](auto& r) {
    auto& g = c.lhs.gains;
    r.field("Kd", g.Kd);
    r.field("Lambda", g.Lambda);
    r.field("eta", g.eta);
    r.field("epsilon", g.epsilon);
    r.field("robust_term", g.robust_term);
    r.field("nu_dot_filter_tau", c.lhs.nu_dot_filter_tau);
    r.field("singularity_threshold", c.lhs.singularity_threshold);
    r.object("apf", [&](auto& a) {
      auto& p = c.lhs.apf;
      a.field("obstacle_radius", p.obstacle_radius);
      a.field("influence_dist", p.influence_dist);
      a.field("q_min", p.q_min);
      a.field("q_max", p.q_max);
      a.field("limit_margin", p.limit_margin);
      a.field("weight_obstacle", p.weight_obstacle);
      a.field("weight_limits", p.weight_limits);
      a.field("rho_floor", p.rho_floor);
      a.field("gradient_step", p.gradient_step);
    });
    r.object("trajectory", [&](auto& t) {
      auto& tr = c.lhs.trajectory;
      t.field("amplitude", tr.amplitude);
      t.field("period", tr.period);
      t.field("offset", tr.offset);
      t.list("harmonics", tr.harmonics, [](auto& h, Harmonic& hm) {
        h.field("amplitude", hm.amplitude);
        h.field("frequency", hm.frequency);
      });
    });
  });
  v.object("rhs", [&](auto& r) {
    auto& g = c.rhs.gains;
    r.field("Td", g.Td);
    r.field("safety", g.safety);
    r.field("beta_cap_log", g.beta_cap_log);
    r.field("det_threshold", g.det_threshold);
    r.field("stability_limit", g.stability_limit);
    r.field("condition_limit", g.condition_limit);
    r.field("observer_cutoff_hz", c.rhs.observer_cutoff_hz);
    r.field("gain_slew_tau", c.rhs.gain_slew_tau);
    r.field("freeze_timeout", c.rhs.freeze_timeout);
    r.field("integrator", c.rhs.integrator);
    r.object("chi", [&](auto& x) {
      x.field("window", c.rhs.chi.window);
      x.field("decay", c.rhs.chi.decay);
      x.field("decay_interval", c.rhs.chi.decay_interval);
      x.field("floor", c.rhs.chi.floor);
    });
  });
  v.object("truth", [&](auto& r) {
    auto& m = c.truth;
    r.field("B_nom", m.B_nom);
    r.field("D_nom", m.D_nom);
    r.field("d0", m.d0);
    r.field("d1", m.d1);
    r.field("d2", m.d2);
    r.field("b1", m.b1);
    r.field("b2", m.b2);
    r.field("b3", m.b3);
    r.object("disturbance", [&](auto& d) {
      d.field("step", m.disturbance.step);
      d.field("amplitude", m.disturbance.amplitude);
      d.field("frequency", m.disturbance.frequency);
    });
  });
  v.object("learner", [&](auto& r) {
    auto& l = c.learner;
    r.field("lr", l.adam.lr);
    r.field("beta1", l.adam.beta1);
    r.field("beta2", l.adam.beta2);
    r.field("epsilon", l.adam.epsilon);
    r.field("batch_size", l.batch_size);
    r.field("buffer_size", l.buffer_size);
    r.field("feature_expansion", l.feature_expansion);
    r.field("init_scale", l.init_scale);
    r.field("initial_B", l.initial_B);
    r.field("initial_D", l.initial_D);
    r.field("disturbance_feedthrough", c.learner_disturbance_feedthrough);
  });
  v.field("eigen_grid", c.eigen_grid);
  v.field("metrics_window", c.metrics_window);
}

/// Applies a JSON document on top of `base` and validates the result.
inline ScenarioConfig config_from_json(const Json& j, ScenarioConfig base = {}) {
  ConfigReader r(j, "");
  visit_config(r, base);
  r.finish();
  if (base.learner.initial_B.rows() != 2 || base.learner.initial_B.cols() != 2) {
    detail::config_fail("/learner/initial_B", "expected a 2x2 matrix");
  }
  if (base.learner.initial_D.size() != 2) detail::config_fail("/learner/initial_D", "expected 2 entries");
  base.validate();
  return base;
}

inline Json config_to_json(ScenarioConfig c) {
  ConfigWriter w;
  visit_config(w, c);
  return std::move(w.json());
}

inline Json parse_config_text(std::istream& is, const std::string& name) {
  try {
    return Json::parse(is, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

inline ScenarioConfig load_config(const std::string& path, ScenarioConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  const Json j = parse_config_text(is, path);
  try {
    return config_from_json(j, std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void save_config(const std::string& path, const ScenarioConfig& c) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << config_to_json(c).dump(2) << '\n';
}

}  // namespace dacph
