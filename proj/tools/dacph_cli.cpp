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

// Command-line front end: run, compare, verify, sweep, config.
//
// Exit codes: 0 ok, 1 verify failure or I/O error, 2 config or usage error,
// 3 numeric abort, 4 gain-freeze timeout.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dacph/config.hpp"
#include "dacph/metrics.hpp"
#include "dacph/sim_engine.hpp"
#include "dacph/verify.hpp"

namespace fs = std::filesystem;
using namespace dacph;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct CommonOptions {
  std::string config_path;
  std::string output_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
};

void add_common(CLI::App* app, CommonOptions& o, bool with_mode) {
  app->add_option("-c,--config", o.config_path, "JSON config; omitted keys keep their defaults");
  app->add_option("-o,--output-dir", o.output_dir, "Directory for outputs")->capture_default_str();
  app->add_option("-s,--seed", o.seed, "Override the config seed");
  if (with_mode) app->add_option("-m,--mode", o.mode, "Override the control mode")->check(CLI::IsMember({"dac", "baseline"}));
}

/// Defaults, then the file, then flags; validated.
ScenarioConfig effective_config(const CommonOptions& o) {
  ScenarioConfig cfg = o.config_path.empty() ? ScenarioConfig{} : load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.mode) cfg.mode = *o.mode == "dac" ? ControlMode::DAC : ControlMode::Baseline;
  cfg.validate();
  return cfg;
}

int exit_code(RunStatus s) { return static_cast<int>(s); }

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::map<std::string, std::string> run_facts(const std::string& prefix, const ScenarioConfig& cfg,
                                             const RunResult& r) {
  const auto& e = r.extremes;
  std::map<std::string, std::string> m;
  m[prefix + "mode"] = std::string(mode_name(cfg.mode));
  m[prefix + "seed"] = std::to_string(cfg.seed);
  m[prefix + "status"] = std::string(status_name(r.status));
  if (!r.message.empty()) m[prefix + "message"] = r.message;
  m[prefix + "wall_seconds"] = fmt17(r.wall_seconds);
  m[prefix + "steps"] = std::to_string(e.steps);
  m[prefix + "max_h_lin"] = fmt17(e.max_h_lin);
  m[prefix + "max_h_ang"] = fmt17(e.max_h_ang);
  m[prefix + "min_clearance"] = fmt17(e.min_clearance);
  m[prefix + "max_projector_residual"] = fmt17(e.max_projector_residual);
  m[prefix + "max_loop_radius"] = fmt17(e.max_loop_radius);
  m[prefix + "freeze_events"] = std::to_string(e.freeze_events);
  m[prefix + "singular_steps"] = std::to_string(e.singular_steps);
  m[prefix + "floor_steps"] = std::to_string(e.floor_steps);
  return m;
}

void write_checkpoint(const fs::path& path, const Simulator& sim) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  save_checkpoint(os, sim.learner().network(), sim.learner().optimizer());
}

struct RunOutput {
  RunResult result;
  bool has_checkpoint = false;
};

/// Runs one scenario and writes <stem>.csv and, for DAC, <stem>.ckpt.
RunOutput run_one(const ScenarioConfig& cfg, const fs::path& dir, const std::string& stem) {
  Simulator sim(cfg);
  RunOutput out{sim.run()};
  out.result.log.write_csv((dir / (stem + ".csv")).string());
  if (cfg.mode == ControlMode::DAC) {
    write_checkpoint(dir / (stem + ".ckpt"), sim);
    out.has_checkpoint = true;
  }
  return out;
}

void report(const char* label, const RunResult& r) {
  std::fprintf(stderr, "%s: %s in %.2f s%s%s\n", label, std::string(status_name(r.status)).c_str(), r.wall_seconds,
               r.message.empty() ? "" : ": ", r.message.c_str());
}

int cmd_run(const CommonOptions& o) {
  const ScenarioConfig cfg = effective_config(o);
  const fs::path dir(o.output_dir);
  fs::create_directories(dir);
  save_config((dir / "config.json").string(), cfg);
  const auto out = run_one(cfg, dir, "run");
  const RunSummary s = summarize(out.result.log, {cfg.metrics_window});
  write_summary((dir / "summary.txt").string(), s, run_facts("", cfg, out.result));
  report(std::string(mode_name(cfg.mode)).c_str(), out.result);
  return exit_code(out.result.status);
}

struct PairResult {
  RunResult dac, baseline;
  RunSummary summary;
};

PairResult compare_pair(const ScenarioConfig& base, const fs::path& dir) {
  ScenarioConfig dcfg = base, bcfg = base;
  dcfg.mode = ControlMode::DAC;
  bcfg.mode = ControlMode::Baseline;
  PairResult p;
  p.dac = run_one(dcfg, dir, "dac").result;
  p.baseline = run_one(bcfg, dir, "baseline").result;
  p.summary = compare(p.dac.log, p.baseline.log, {base.metrics_window});
  auto facts = run_facts("dac.", dcfg, p.dac);
  facts.merge(run_facts("baseline.", bcfg, p.baseline));
  write_summary((dir / "summary.txt").string(), p.summary, facts);
  return p;
}

int pair_exit(const PairResult& p) {
  if (p.dac.status != RunStatus::Ok) return exit_code(p.dac.status);
  return exit_code(p.baseline.status);
}

int cmd_compare(const CommonOptions& o) {
  const ScenarioConfig cfg = effective_config(o);
  const fs::path dir(o.output_dir);
  fs::create_directories(dir);
  save_config((dir / "config.json").string(), cfg);
  const PairResult p = compare_pair(cfg, dir);
  report("dac", p.dac);
  report("baseline", p.baseline);
  const auto& s = p.summary;
  std::printf("tracking_reduction_pct = %.4f\neffort_increase_pct = %.4f\nB_error_ratio = %.4f\nD_error_ratio = %.4f\n",
              *s.tracking_reduction_pct, *s.effort_increase_pct, s.B_error_ratio, s.D_error_ratio);
  return pair_exit(p);
}

int cmd_verify(const CommonOptions& o, bool skip_runs) {
  const ScenarioConfig cfg = effective_config(o);
  const auto checks = verify::fast_suite(cfg, !skip_runs);
  bool ok = true;
  for (const auto& c : checks) {
    std::printf("%-4s %-22s %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    ok = ok && c.pass;
  }
  return ok ? 0 : kExitFailure;
}

int cmd_sweep(const CommonOptions& o, std::uint64_t first_seed, int count, int jobs) {
  const ScenarioConfig base = effective_config(o);
  const fs::path dir(o.output_dir);
  fs::create_directories(dir);
  save_config((dir / "config.json").string(), base);
  if (count < 1) throw ConfigError("sweep: --count must be positive");
  jobs = std::clamp(jobs, 1, count);

  std::vector<std::optional<PairResult>> results(count);
  std::vector<std::string> errors(count);
  std::atomic<int> next{0};
  std::mutex io;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      ScenarioConfig cfg = base;
      cfg.seed = first_seed + static_cast<std::uint64_t>(i);
      const fs::path sub = dir / ("seed_" + std::to_string(cfg.seed));
      try {
        fs::create_directories(sub);
        save_config((sub / "config.json").string(), cfg);
        results[i] = compare_pair(cfg, sub);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
      std::lock_guard<std::mutex> lock(io);
      std::fprintf(stderr, "seed %llu done\n", static_cast<unsigned long long>(cfg.seed));
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ofstream csv(dir / "sweep.csv");
  if (!csv) throw Error("cannot open sweep.csv for writing");
  csv << "seed,dac_status,baseline_status,tracking_reduction_pct,effort_increase_pct,B_error_ratio,D_error_ratio,"
         "dac_wall_seconds\n";
  int code = 0;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(i);
    if (!results[i]) {
      csv << seed << ",error,error,nan,nan,nan,nan,nan\n";
      std::fprintf(stderr, "seed %llu: %s\n", static_cast<unsigned long long>(seed), errors[i].c_str());
      code = code ? code : kExitFailure;
      continue;
    }
    const auto& p = *results[i];
    const auto& s = p.summary;
    csv << seed << ',' << status_name(p.dac.status) << ',' << status_name(p.baseline.status) << ','
        << fmt17(*s.tracking_reduction_pct) << ',' << fmt17(*s.effort_increase_pct) << ',' << fmt17(s.B_error_ratio)
        << ',' << fmt17(s.D_error_ratio) << ',' << fmt17(p.dac.wall_seconds) << '\n';
    if (!code) code = pair_exit(p);
  }
  return code;
}

int cmd_config(const CommonOptions& o, const std::string& out) {
  const ScenarioConfig cfg = effective_config(o);
  if (out.empty() || out == "-") {
    std::cout << config_to_json(cfg).dump(2) << '\n';
  } else {
    save_config(out, cfg);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DAC-pH free-floating manipulator simulation and control"};
  app.require_subcommand(1);

  CommonOptions run_o, cmp_o, ver_o, swp_o, cfg_o;
  auto* run = app.add_subcommand("run", "Run one scenario: CSV log, summary, config echo, learner checkpoint");
  add_common(run, run_o, true);
  auto* cmp = app.add_subcommand("compare", "Run DAC and baseline on the same scenario and compare");
  add_common(cmp, cmp_o, false);
  auto* ver = app.add_subcommand("verify", "Run the property suite and print a pass/fail table");
  add_common(ver, ver_o, false);
  bool skip_runs = false;
  ver->add_flag("--skip-runs", skip_runs, "Skip the closed-loop determinism and clearance runs");
  auto* swp = app.add_subcommand("sweep", "Paired compare over consecutive seeds in parallel");
  add_common(swp, swp_o, false);
  std::uint64_t first_seed = 1;
  int count = 4;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  swp->add_option("--first-seed", first_seed, "First seed")->capture_default_str();
  swp->add_option("--count", count, "Number of seeds")->capture_default_str();
  swp->add_option("-j,--jobs", jobs, "Parallel runs")->capture_default_str();
  auto* cfg = app.add_subcommand("config", "Print or write the effective config");
  add_common(cfg, cfg_o, true);
  std::string cfg_out;
  cfg->add_option("--write", cfg_out, "Write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_o);
    if (*cmp) return cmd_compare(cmp_o);
    if (*ver) return cmd_verify(ver_o, skip_runs);
    if (*swp) return cmd_sweep(swp_o, first_seed, count, jobs);
    if (*cfg) return cmd_config(cfg_o, cfg_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericAbort& e) {
    std::fprintf(stderr, "numeric abort: %s\n", e.what());
    return static_cast<int>(RunStatus::NumericAbort);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
