/*
 * Copyright (C) 2026 The polarsim authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
// Command-line front end: simulate, sweep, staircase, verify, germany,
// thresholds. Exit codes: 0 success, 1 verification or numerical failure,
// 2 configuration error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "polarsim/scenario.hpp"
#include "polarsim/verification.hpp"

namespace {

using polarsim::Error;
using polarsim::ErrorCode;
namespace sc = polarsim::scenario;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = polarsim::VerifyOptions{}.seed;
  std::size_t samples = polarsim::VerifyOptions{}.draws;
  bool full = false;
  unsigned workers = polarsim::default_workers();
};

sc::ScenarioConfig load_for(const std::string& command, const Options& o) {
  sc::ScenarioConfig cfg = sc::load_config(o.config);
  if (cfg.command != command) {
    throw Error(ErrorCode::ConfigError,
                o.config + ": command is '" + cfg.command + "', expected '" + command + "'");
  }
  return cfg;
}

void print_files(const sc::RunResult& res, const std::filesystem::path& out) {
  for (const auto& f : res.summary["files"]) {
    std::cout << (out / f["path"].get<std::string>()).string() << "  rows=" << f["rows"] << '\n';
  }
}

int run_scenario(const std::string& command, const Options& o) {
  const sc::ScenarioConfig cfg = load_for(command, o);
  const sc::RunResult res = sc::run(cfg, o.out, o.workers);
  if (command == "thresholds") {
    std::cout << res.summary.dump(2) << '\n';
  } else {
    print_files(res, o.out);
    std::cout << (std::filesystem::path(o.out) / (cfg.name + "_summary.json")).string() << '\n';
  }
  return res.ok ? kExitOk : kExitFailure;
}

int run_germany(const Options& o) {
  sc::ScenarioConfig cfg;
  if (!o.config.empty()) {
    cfg = load_for("germany", o);
  } else {
    cfg.name = "table_germany";
    cfg.command = "germany";
  }
  const sc::RunResult res = sc::run(cfg, o.out, o.workers);
  print_files(res, o.out);
  for (const auto& f : res.summary["floors"]) {
    std::cout << "beta=" << f["beta"] << "  centrist_floor=" << f["centrist_floor"]
              << "  radical_floor=" << f["radical_floor"] << '\n';
  }
  return res.ok ? kExitOk : kExitFailure;
}

int run_verify(const Options& o, bool seed_given, bool samples_given) {
  polarsim::VerifyOptions v;
  v.workers = o.workers;
  if (!o.config.empty()) {
    const sc::ScenarioConfig cfg = load_for("verify", o);
    if (cfg.seed) v.seed = *cfg.seed;
    if (cfg.samples) v.draws = *cfg.samples;
  }
  if (seed_given) v.seed = o.seed;
  if (samples_given) v.draws = o.samples;
  if (o.full) v.draws *= 10;

  const auto reports = polarsim::run_verify_suite(v);
  nlohmann::json summary = {{"command", "verify"}, {"seed", v.seed}, {"draws", v.draws}};
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : reports) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << "  samples=" << r.samples
              << "  worst=" << polarsim::csv::format(r.worst);
    if (!r.pass) {
      std::cout << "  witness=[";
      for (std::size_t i = 0; i < r.witness.size(); ++i) {
        std::cout << (i ? "," : "") << polarsim::csv::format(r.witness[i]);
      }
      std::cout << "]";
      if (!r.detail.empty()) std::cout << "  " << r.detail;
    }
    std::cout << '\n';
    list.push_back(sc::to_json(r));
  }
  summary["reports"] = list;
  summary["pass"] = polarsim::all_pass(reports);
  sc::OutputDir out(o.out);
  out.write("verify_summary.json", summary);
  return polarsim::all_pass(reports) ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polarsim: electorate competition models on probability simplices"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", o.config, "scenario file (JSON)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  };

  const char* scenario_commands[] = {"simulate", "sweep", "staircase", "thresholds"};
  const char* descriptions[] = {"integrate the panels of a scenario",
                                "evaluate equilibria or the shock function on a grid",
                                "run a shock sequence and report long-run floors",
                                "print thresholds and window bounds"};
  for (int i = 0; i < 4; ++i) add_common(app.add_subcommand(scenario_commands[i], descriptions[i]), true);

  auto* germany = app.add_subcommand("germany", "electorate decomposition and calibrated floors");
  add_common(germany, false);

  auto* verify = app.add_subcommand("verify", "sampled checks of the qualitative results");
  add_common(verify, false);
  auto* seed_opt = verify->add_option("--seed", o.seed, "generator seed");
  auto* samples_opt = verify->add_option("--samples", o.samples, "parameter draws")->check(CLI::PositiveNumber);
  verify->add_flag("--full", o.full, "ten times the default sample counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "germany") return run_germany(o);
    if (name == "verify") return run_verify(o, seed_opt->count() > 0, samples_opt->count() > 0);
    return run_scenario(name, o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
