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


#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "dacph/config.hpp"

namespace dacph {
namespace {

Json parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config_text(is, "test");
}

std::string error_of(const std::string& text) {
  try {
    config_from_json(parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EchoRoundTrip) {
  ScenarioConfig cfg;
  cfg.seed = 42;
  cfg.mode = ControlMode::Baseline;
  cfg.lhs.trajectory.harmonics = {{0.1, 2.0}};
  cfg.rhs.integrator = IntegratorKind::Trapezoidal;
  cfg.truth.b1(1, 0) = 0.123456789012345;
  const Json j = config_to_json(cfg);
  const ScenarioConfig back = config_from_json(j);
  EXPECT_EQ(config_to_json(back), j);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.mode, ControlMode::Baseline);
  EXPECT_EQ(back.truth.b1(1, 0), 0.123456789012345);
}

TEST(Config, PartialOverride) {
  const auto cfg = config_from_json(parse(R"({"seed": 3, "rates": {"log_every": 10}})"));
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.rates.log_every, 10);
  EXPECT_EQ(cfg.rates.plant_hz, 1000.0);
}

TEST(Config, CommentsAccepted) {
  const auto cfg = config_from_json(parse("// leading\n{ \"seed\": 5 /* inline */ }\n"));
  EXPECT_EQ(cfg.seed, 5u);
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_NE(error_of(R"({"rates": {"lhs_hz": "fast"}})").find("/rates/lhs_hz"), std::string::npos);
  EXPECT_NE(error_of(R"({"lhs": {"bogus": 1}})").find("/lhs/bogus"), std::string::npos);
  EXPECT_NE(error_of(R"({"mode": "fancy"})").find("/mode"), std::string::npos);
  EXPECT_NE(error_of(R"({"version": 2})").find("/version"), std::string::npos);
  EXPECT_NE(error_of(R"({"truth": {"B_nom": [[1, 0]]}})").find("/truth/B_nom"), std::string::npos);
  EXPECT_FALSE(error_of(R"({"rates": {"lhs_hz": 300}})").empty());
  EXPECT_THROW(parse("{ not json"), ConfigError);
}

TEST(Config, ShippedDefaultsMatchBuiltIn) {
  const auto cfg = load_config(std::string(DACPH_SOURCE_DIR) + "/config/default.json");
  EXPECT_EQ(config_to_json(cfg), config_to_json(ScenarioConfig{}));
}

}  // namespace
}  // namespace dacph
