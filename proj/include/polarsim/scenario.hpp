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
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "polarsim/csv.hpp"
#include "polarsim/diagnostics.hpp"
#include "polarsim/dynamics.hpp"
#include "polarsim/equilibria.hpp"
#include "polarsim/model.hpp"
#include "polarsim/parallel.hpp"
#include "polarsim/shocks.hpp"
#include "polarsim/spectral.hpp"

namespace polarsim::scenario {

using json = nlohmann::json;

enum class ModelKind { Baseline, FourGroup };

inline const char* to_string(ModelKind k) { return k == ModelKind::Baseline ? "baseline" : "4group"; }

// ---------------------------------------------------------------------------
// Parameters by name
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& parameter_names(ModelKind kind, bool symmetric) {
  static const std::vector<std::string> sym3 = {"alpha", "gamma", "mu"};
  static const std::vector<std::string> sym4 = {"alpha", "gamma", "mu", "delta", "rho"};
  static const std::vector<std::string> full3 = {"alpha_L", "alpha_R",  "mu_L",
                                                 "mu_R",    "gamma_RL", "gamma_LR"};
  static const std::vector<std::string> full4 = {"alpha_L",  "alpha_R",  "mu_L",    "mu_R", "gamma_RL",
                                                 "gamma_LR", "delta_L",  "delta_R", "rho"};
  if (kind == ModelKind::Baseline) return symmetric ? sym3 : full3;
  return symmetric ? sym4 : full4;
}

/// Named rates in either the symmetric or the full parameterisation.
struct ParamSet {
  ModelKind kind = ModelKind::Baseline;
  bool symmetric = false;
  std::map<std::string, double> values;

  double at(const std::string& name) const { return values.at(name); }

  SymmetricParams as_symmetric() const {
    SymmetricParams s;
    s.alpha = at("alpha");
    s.gamma = at("gamma");
    s.mu = at("mu");
    if (kind == ModelKind::FourGroup) {
      s.delta = at("delta");
      s.rho = at("rho");
    }
    return s.validated();
  }

  BaselineParams baseline() const {
    if (symmetric) return as_symmetric().to_baseline();
    return validate_baseline(std::array<double, 6>{at("alpha_L"), at("alpha_R"), at("mu_L"),
                                                   at("mu_R"), at("gamma_RL"), at("gamma_LR")});
  }

  FourGroupParams four_group() const {
    if (kind != ModelKind::FourGroup) {
      throw Error(ErrorCode::ConfigError, "four-group parameters requested from a baseline set");
    }
    if (symmetric) return as_symmetric().to_four_group();
    return validate_four_group({baseline(), at("delta_L"), at("delta_R"), at("rho")});
  }

  json to_json() const {
    json j = json::object();
    for (const auto& [k, v] : values) j[k] = v;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Strict JSON reading
// ---------------------------------------------------------------------------

/// Read-only view of a JSON node that remembers its path for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ConfigError, (path_.empty() ? std::string("<root>") : path_) + ": " + what);
  }

  void expect_object() const {
    if (!j_->is_object()) fail("expected an object");
  }

  void allow_only(const std::set<std::string>& keys) const {
    expect_object();
    for (const auto& item : j_->items()) {
      if (!keys.count(item.key())) Node(item.value(), child_path(item.key())).fail("unknown key");
    }
  }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node at(const std::string& key) const {
    expect_object();
    if (!j_->contains(key)) Node(*j_, child_path(key)).fail("missing required key");
    return Node((*j_)[key], child_path(key));
  }

  Node at(std::size_t i) const { return Node((*j_)[i], path_ + "[" + std::to_string(i) + "]"); }

  std::size_t size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
  }

  double number() const {
    if (!j_->is_number()) fail("expected a number");
    const double v = j_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be positive, got " + csv::format(v));
    return v;
  }

  double nonnegative() const {
    const double v = number();
    if (!(v >= 0.0)) fail("must be nonnegative, got " + csv::format(v));
    return v;
  }

  std::string string() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  std::size_t count() const {
    if (!j_->is_number_unsigned() && !(j_->is_number_integer() && j_->get<long long>() >= 0)) {
      fail("expected a nonnegative integer");
    }
    return j_->get<std::size_t>();
  }

 private:
  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* j_;
  std::string path_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ShockSpec {
  ShockEvent event;
};

struct Panel {
  std::string name;
  ParamSet params;
  std::vector<SimplexState4> initial;  // A ignored for the baseline model
  std::vector<ShockEvent> shocks;
  IntegratorConfig integrator;
};

struct SweepAxis {
  std::string kind;   // "equilibrium" or "phi"
  std::string param;  // swept parameter ("delta_shock" for phi sweeps)
  double from = 0.0, to = 0.0, step = 0.0;

  std::vector<double> grid() const {
    std::vector<double> g;
    if (step <= 0.0) return {from};
    const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) g.push_back(from + static_cast<double>(i) * step);
    return g;
  }
};

struct GermanyCalibration {
  double mu = 0.22;
  std::vector<double> betas = {0.18, 0.249, 0.2917};
};

struct ScenarioConfig {
  std::string name;
  std::string command;  // simulate | sweep | staircase | germany | thresholds
  ModelKind model = ModelKind::Baseline;
  IntegratorConfig integrator;
  std::optional<double> a_background;
  std::vector<Panel> panels;
  std::optional<SweepAxis> sweep;
  double floor_horizon = 2000.0;
  GermanyCalibration calibration;
  std::optional<std::uint64_t> seed;     // verify only
  std::optional<std::size_t> samples;    // verify only
};

namespace detail {

/// `swept` names a parameter that may be omitted because a sweep supplies
/// it; it is then set to `swept_value`.
inline ParamSet parse_params(const Node& n, ModelKind kind, const std::string& swept = {},
                             double swept_value = 0.0) {
  n.expect_object();
  ParamSet p;
  p.kind = kind;
  p.symmetric = n.has("alpha") || (swept == "alpha" && !n.has("alpha_L"));
  const auto& names = parameter_names(kind, p.symmetric);
  n.allow_only(std::set<std::string>(names.begin(), names.end()));
  for (const std::string& k : names) {
    p.values[k] = (k == swept && !n.has(k)) ? swept_value : n.at(k).positive();
  }
  return p;
}

inline IntegratorConfig parse_integrator(const Node& n, IntegratorConfig cfg) {
  n.allow_only({"rel_tol", "abs_tol", "max_step", "t_end", "sample_interval", "max_steps"});
  if (n.has("rel_tol")) cfg.rel_tol = n.at("rel_tol").positive();
  if (n.has("abs_tol")) cfg.abs_tol = n.at("abs_tol").positive();
  if (n.has("max_step")) cfg.max_step = n.at("max_step").positive();
  if (n.has("t_end")) cfg.t_end = n.at("t_end").positive();
  if (n.has("sample_interval")) cfg.sample_interval = n.at("sample_interval").positive();
  if (n.has("max_steps")) cfg.max_steps = n.at("max_steps").count();
  try {
    return cfg.validated();
  } catch (const Error& e) {
    n.fail(e.what());
  }
}

inline SimplexState4 parse_state(const Node& n, ModelKind kind) {
  if (kind == ModelKind::Baseline) {
    n.allow_only({"L", "R"});
  } else {
    n.allow_only({"L", "R", "A"});
  }
  SimplexState4 s{n.at("L").nonnegative(), n.at("R").nonnegative(),
                  kind == ModelKind::FourGroup && n.has("A") ? n.at("A").nonnegative() : 0.0};
  if (s.L + s.R + s.A > 1.0 + kProjectionTol) n.fail("shares sum above 1");
  return s;
}

inline ShockEvent parse_shock(const Node& n, double t_end) {
  n.allow_only({"time", "delta", "s", "dbeta", "replacement"});
  ShockEvent e;
  e.time = n.at("time").nonnegative();
  if (e.time > t_end) n.at("time").fail("shock time beyond t_end");
  if (n.has("delta") == n.has("s")) n.fail("give exactly one of 'delta' and 's'");
  if (n.has("delta")) {
    e.delta = n.at("delta").nonnegative();
    if (!(e.delta < 1.0)) n.at("delta").fail("must lie in [0,1)");
  } else {
    e.raw_s = n.at("s").nonnegative();
    e.delta = -std::expm1(-*e.raw_s);
  }
  if (n.has("dbeta")) e.dbeta = n.at("dbeta").nonnegative();
  if (n.has("replacement")) {
    if (n.has("dbeta")) n.fail("'dbeta' and 'replacement' are exclusive");
    e.replacement = parse_params(n.at("replacement"), ModelKind::FourGroup).four_group();
  }
  return e.validated();
}

inline Panel parse_panel(const Node& n, const ScenarioConfig& cfg) {
  n.allow_only({"name", "params", "initial", "shocks", "t_end"});
  Panel p;
  p.name = n.at("name").string();
  if (cfg.sweep && cfg.sweep->kind == "equilibrium") {
    p.params = parse_params(n.at("params"), cfg.model, cfg.sweep->param, cfg.sweep->from);
  } else {
    p.params = parse_params(n.at("params"), cfg.model);
  }
  try {
    if (cfg.model == ModelKind::Baseline) {
      p.params.baseline();
    } else {
      p.params.four_group();
    }
  } catch (const Error& e) {
    n.at("params").fail(e.what());
  }
  p.integrator = cfg.integrator;
  if (n.has("t_end")) {
    p.integrator.t_end = n.at("t_end").positive();
  }
  if (n.has("initial")) {
    const Node init = n.at("initial");
    for (std::size_t i = 0; i < init.size(); ++i) p.initial.push_back(parse_state(init.at(i), cfg.model));
  }
  if (n.has("shocks")) {
    if (cfg.model != ModelKind::FourGroup) n.at("shocks").fail("shocks need the 4group model");
    const Node shocks = n.at("shocks");
    double prev = -1.0;
    for (std::size_t i = 0; i < shocks.size(); ++i) {
      ShockEvent e = parse_shock(shocks.at(i), p.integrator.t_end);
      if (!(e.time > prev)) shocks.at(i).at("time").fail("shock times must increase strictly");
      prev = e.time;
      p.shocks.push_back(e);
    }
  }
  return p;
}

}  // namespace detail

/// Parses and validates a scenario document. Errors carry the path of the
/// offending key.
inline ScenarioConfig parse_config(const json& doc) {
  const Node root(doc, "");
  root.allow_only({"name", "description", "command", "model", "integrator", "a_background",
                   "panels", "sweep", "floor_horizon", "calibration", "seed", "samples"});
  ScenarioConfig cfg;
  cfg.name = root.at("name").string();
  if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos) {
    root.at("name").fail("must be a plain file-name stem");
  }
  if (root.has("description")) root.at("description").string();
  cfg.command = root.at("command").string();
  static const std::set<std::string> commands = {"simulate", "sweep", "staircase", "germany",
                                                 "thresholds", "verify"};
  if (!commands.count(cfg.command)) root.at("command").fail("unknown command '" + cfg.command + "'");
  for (const char* k : {"seed", "samples"}) {
    if (root.has(k) && cfg.command != "verify") root.at(k).fail("only the verify command takes this key");
  }

  if (cfg.command == "verify") {
    if (root.has("seed")) cfg.seed = root.at("seed").count();
    if (root.has("samples")) {
      cfg.samples = root.at("samples").count();
      if (*cfg.samples == 0) root.at("samples").fail("must be positive");
    }
    for (const char* k : {"model", "panels", "sweep", "integrator", "floor_horizon", "calibration",
                          "a_background"}) {
      if (root.has(k)) root.at(k).fail("not used by the verify command");
    }
    return cfg;
  }

  if (cfg.command == "germany") {
    if (root.has("a_background")) cfg.a_background = root.at("a_background").nonnegative();
    if (root.has("calibration")) {
      const Node c = root.at("calibration");
      c.allow_only({"mu", "betas"});
      cfg.calibration.mu = c.at("mu").positive();
      cfg.calibration.betas.clear();
      const Node b = c.at("betas");
      for (std::size_t i = 0; i < b.size(); ++i) cfg.calibration.betas.push_back(b.at(i).positive());
      if (cfg.calibration.betas.empty()) b.fail("needs at least one value");
    }
    for (const char* k : {"model", "panels", "sweep", "integrator", "floor_horizon"}) {
      if (root.has(k)) root.at(k).fail("not used by the germany command");
    }
    return cfg;
  }

  const std::string model = root.at("model").string();
  if (model == "baseline") {
    cfg.model = ModelKind::Baseline;
  } else if (model == "4group") {
    cfg.model = ModelKind::FourGroup;
  } else {
    root.at("model").fail("expected 'baseline' or '4group'");
  }
  if (root.has("integrator")) cfg.integrator = detail::parse_integrator(root.at("integrator"), cfg.integrator);
  if (root.has("a_background")) cfg.a_background = root.at("a_background").nonnegative();
  if (root.has("floor_horizon")) cfg.floor_horizon = root.at("floor_horizon").positive();

  if (cfg.command == "sweep") {
    const Node s = root.at("sweep");
    s.allow_only({"kind", "param", "from", "to", "step"});
    SweepAxis ax;
    ax.kind = s.at("kind").string();
    ax.from = s.at("from").number();
    ax.to = s.at("to").number();
    ax.step = s.has("step") ? s.at("step").nonnegative() : 0.0;
    if (ax.to < ax.from) s.at("to").fail("must not be below 'from'");
    if (ax.kind == "equilibrium") {
      ax.param = s.at("param").string();
      const auto& a = parameter_names(cfg.model, true);
      const auto& b = parameter_names(cfg.model, false);
      if (std::find(a.begin(), a.end(), ax.param) == a.end() &&
          std::find(b.begin(), b.end(), ax.param) == b.end()) {
        s.at("param").fail("'" + ax.param + "' is not a parameter name");
      }
      if (!(ax.from > 0.0)) s.at("from").fail("swept rates must stay positive");
    } else if (ax.kind == "phi") {
      if (cfg.model != ModelKind::FourGroup) s.at("kind").fail("phi sweeps need the 4group model");
      if (s.has("param")) s.at("param").fail("phi sweeps run over the shock amplitude only");
      ax.param = "delta_shock";
      if (ax.from < 0.0 || ax.to > 1.0) s.fail("shock amplitude range must lie in [0,1]");
    } else {
      s.at("kind").fail("expected 'equilibrium' or 'phi'");
    }
    cfg.sweep = ax;
  } else if (root.has("sweep")) {
    root.at("sweep").fail("only the sweep command takes a sweep block");
  }

  const Node panels = root.at("panels");
  if (panels.size() == 0) panels.fail("needs at least one panel");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < panels.size(); ++i) {
    Panel p = detail::parse_panel(panels.at(i), cfg);
    if (!seen.insert(p.name).second) panels.at(i).at("name").fail("duplicate panel name");
    if ((cfg.command == "simulate" || cfg.command == "staircase") && p.initial.empty()) {
      panels.at(i).fail("missing required key 'initial'");
    }
    cfg.panels.push_back(std::move(p));
  }
  if (cfg.sweep && cfg.sweep->kind == "equilibrium") {
    for (std::size_t i = 0; i < cfg.panels.size(); ++i) {
      if (!cfg.panels[i].params.values.count(cfg.sweep->param)) {
        root.at("sweep").at("param").fail("'" + cfg.sweep->param + "' is not a parameter of panel '" +
                                          cfg.panels[i].name + "'");
      }
    }
  }
  if (cfg.command == "staircase" && cfg.model != ModelKind::FourGroup) {
    root.at("model").fail("staircase needs the 4group model");
  }

  return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::ConfigError, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  return parse_config(doc);
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

inline json to_json(const SimplexState3& s) { return {{"L", s.L}, {"R", s.R}, {"C", s.C()}}; }

inline json to_json(const SimplexState4& s) {
  return {{"L", s.L}, {"R", s.R}, {"A", s.A}, {"C", s.C()}};
}

inline json to_json(const Threshold& t) {
  if (is_shock_proof(t)) return "shock_proof";
  return std::get<double>(t);
}

inline json to_json(const DiagnosticReport& r) {
  json j = {{"name", r.name}, {"samples", r.samples}, {"worst", r.worst}, {"pass", r.pass}};
  if (!r.witness.empty()) j["witness"] = r.witness;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

inline json to_json(const Eigenvalues& ev) {
  json j = json::array();
  for (const auto& z : ev) j.push_back({z.real(), z.imag()});
  return j;
}

template <class State>
json to_json(const EquilibriumReport<State>& r) {
  json j = {{"kind", to_string(r.kind)}, {"exists", r.exists}, {"reason", r.reason}};
  if (r.exists) {
    j["location"] = to_json(r.location);
    j["classification"] = to_string(r.classification);
    j["eigenvalues"] = to_json(r.eigenvalues);
  }
  return j;
}

inline json to_json(const ShockRecord& r) {
  json j = {{"k", r.k},
            {"time", r.time},
            {"delta", r.delta},
            {"dbeta", r.dbeta},
            {"r_rad_before", r.r_rad_before},
            {"r_rad_after", r.r_rad_after},
            {"regime_before", to_string(r.regime_before)},
            {"regime_after", to_string(r.regime_after)},
            {"pre", to_json(r.pre)},
            {"post", to_json(r.post)},
            {"seeded", r.seeded},
            {"floor", r.floor},
            {"surge", r.surge.surged},
            {"peak_V", r.surge.peak_V},
            {"peak_time", r.surge.peak_time}};
  j["B"] = r.B ? json(*r.B) : json(nullptr);
  j["surge_end"] = r.surge.end_time ? json(*r.surge.end_time) : json(nullptr);
  j["surge_duration"] = r.surge.end_time ? json(*r.surge.end_time - r.time) : json(nullptr);
  j["window"] = r.window ? json(*r.window) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Output bookkeeping
// ---------------------------------------------------------------------------

/// Writes files into one directory and records them for the manifest.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::ConfigError, "cannot create " + dir_.string());
  }

  const std::filesystem::path& dir() const { return dir_; }

  void write(const std::string& file, const csv::Table& t) {
    t.write((dir_ / file).string());
    manifest_.push_back({{"path", file}, {"rows", t.rows()}});
  }

  void write(const std::string& file, const json& j) {
    std::ofstream f(dir_ / file, std::ios::binary);
    if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + (dir_ / file).string());
    f << j.dump(2) << '\n';
  }

  const json& manifest() const { return manifest_; }

 private:
  std::filesystem::path dir_;
  json manifest_ = json::array();
};

struct RunResult {
  json summary;
  bool ok = true;  // false when a diagnostic in the summary failed
};

namespace detail {

inline std::string run_file(const std::string& scenario, const Panel& panel, std::size_t ic) {
  std::string f = scenario + "_" + panel.name;
  if (panel.initial.size() > 1) f += "_ic" + std::to_string(ic);
  return f + ".csv";
}

inline csv::Table trajectory_table(const Trajectory3& traj) {
  csv::Table t({"t", "L", "R", "C"});
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& s = traj.states[i];
    t.add_row({csv::format(traj.times[i]), csv::format(s.L), csv::format(s.R), csv::format(s.C())});
  }
  return t;
}

inline csv::Table trajectory_table(const Trajectory4& traj, std::optional<double> a_bg) {
  std::vector<std::string> header = {"t", "L", "R", "C", "A", "event"};
  if (a_bg) header.push_back("A_exc");
  csv::Table t(header);
  std::size_t next_event = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& s = traj.states[i];
    const bool event = next_event < traj.events.size() && traj.events[next_event].sample == i;
    if (event) ++next_event;
    std::vector<std::string> row = {csv::format(traj.times[i]), csv::format(s.L),
                                    csv::format(s.R),          csv::format(s.C()),
                                    csv::format(s.A),          event ? "1" : "0"};
    if (a_bg) row.push_back(csv::format(s.A - *a_bg));
    t.add_row(std::move(row));
  }
  return t;
}

inline json baseline_reference(const ParamSet& ps) {
  const BaselineParams p = ps.baseline();
  json ref = {{"r_rad", r_rad(p)}, {"e0_stability", to_string(e0_stability(p))}};
  json eq = json::array();
  for (const auto& r : equilibrium_reports(p)) eq.push_back(to_json(r));
  ref["equilibria"] = eq;
  if (ps.symmetric) {
    const double beta = ps.at("alpha") + ps.at("gamma"), mu = ps.at("mu");
    const auto e = symmetric_equilibrium(beta, mu);
    ref["beta"] = beta;
    ref["P_star"] = e ? e->P : 0.0;
    ref["C_star"] = e ? e->C : 1.0;
  }
  if (const auto e1 = interior_equilibrium(p)) {
    ref["attractor"] = to_json(e1->state());
  } else {
    ref["attractor"] = to_json(SimplexState3{0.0, 0.0});
  }
  return ref;
}

inline json four_group_reference(const FourGroupParams& p) {
  json ref = {{"r_rad", r_rad(p.base)}};
  json eq = json::array();
  for (const auto& r : equilibrium_reports(p)) eq.push_back(to_json(r));
  ref["equilibria"] = eq;
  if (auto beta = symmetric_beta(p)) {
    ref["beta"] = *beta;
    if (*beta < p.base.mu_L && p.delta_L > *beta) {
      ref["delta_c_sym"] = to_json(delta_c_sym(*beta, p.base.mu_L, p.delta_L));
    }
  }
  const Matrix2 K = recruitment_matrix(p.base), M = decay_matrix(p.base), D = mobilisation_matrix(p);
  ref["phi_0"] = phi(0.0, K, M, D);
  ref["phi_1"] = phi(1.0, K, M, D);
  if (ref["phi_0"].get<double>() < 1.0) ref["delta_c_asym"] = to_json(delta_c_asym(K, M, D));
  return ref;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline RunResult run_simulate(const ScenarioConfig& cfg, OutputDir& out) {
  RunResult res;
  json panels = json::array();
  for (const Panel& panel : cfg.panels) {
    json pj = {{"name", panel.name}, {"params", panel.params.to_json()},
               {"t_end", panel.integrator.t_end}};
    json runs = json::array();
    if (cfg.model == ModelKind::Baseline) {
      const BaselineParams p = panel.params.baseline();
      pj["reference"] = detail::baseline_reference(panel.params);
      for (std::size_t ic = 0; ic < panel.initial.size(); ++ic) {
        const SimplexState3 s0{panel.initial[ic].L, panel.initial[ic].R};
        const Trajectory3 traj = integrate(p, s0, panel.integrator);
        const std::string file = detail::run_file(cfg.name, panel, ic);
        out.write(file, detail::trajectory_table(traj));
        json diags = json::array({to_json(invariance_check(traj))});
        if (r_rad(p) <= 1.0) diags.push_back(to_json(lyapunov_trace(LyapunovKind::SubcriticalBaseline, p, traj)));
        SimplexState3 target{0.0, 0.0};
        if (auto e1 = interior_equilibrium(p); e1 && s0.L + s0.R > 0.0) target = e1->state();
        runs.push_back({{"initial", to_json(s0)},
                        {"file", file},
                        {"terminal", to_json(traj.final_state())},
                        {"terminal_time", traj.final_time()},
                        {"attractor", to_json(target)},
                        {"distance_to_attractor", max_distance(traj.final_state(), target)},
                        {"diagnostics", diags}});
      }
    } else {
      const FourGroupParams p = panel.params.four_group();
      pj["reference"] = detail::four_group_reference(p);
      for (std::size_t ic = 0; ic < panel.initial.size(); ++ic) {
        const auto [traj, report] = run_shock_sequence(p, panel.initial[ic], panel.shocks, panel.integrator);
        const std::string file = detail::run_file(cfg.name, panel, ic);
        out.write(file, detail::trajectory_table(traj, cfg.a_background));
        json diags = json::array({to_json(invariance_check(traj)), to_json(a_decay_check(p, traj))});
        const bool single_regime =
            std::all_of(traj.regimes.begin(), traj.regimes.end(), [&p](const auto& q) { return q == p; });
        if (single_regime && r_rad(p.base) <= 1.0) {
          diags.push_back(to_json(lyapunov_trace(LyapunovKind::Subcritical4Group, p, traj)));
          if (p.is_symmetric()) diags.push_back(to_json(lyapunov_trace(LyapunovKind::Symmetric4Group, p, traj)));
        }
        const FourGroupParams& last = traj.regimes.back();
        const SimplexState4& fin = traj.final_state();
        const bool seeded = fin.L + fin.R > 0.0;
        SimplexState4 target{0.0, 0.0, 0.0};
        if (auto e1 = interior_equilibrium(last.base); e1 && seeded) target = {e1->L, e1->R, 0.0};
        json shocks = json::array();
        for (const auto& r : report.shocks) shocks.push_back(to_json(r));
        json run = {{"initial", to_json(panel.initial[ic])},
                    {"file", file},
                    {"terminal", to_json(fin)},
                    {"terminal_time", traj.final_time()},
                    {"attractor", to_json(target)},
                    {"floor", longrun_floor(last, seeded)},
                    {"distance_to_attractor", max_distance(fin, target)},
                    {"shocks", shocks},
                    {"diagnostics", diags}};
        run["k_star"] = report.k_star ? json(*report.k_star) : json(nullptr);
        runs.push_back(run);
      }
    }
    for (const auto& r : runs) {
      for (const auto& d : r["diagnostics"]) res.ok = res.ok && d["pass"].get<bool>();
    }
    pj["runs"] = runs;
    panels.push_back(pj);
  }
  res.summary = {{"scenario", cfg.name}, {"command", "simulate"}, {"model", to_string(cfg.model)},
                 {"panels", panels}};
  if (cfg.a_background) res.summary["a_background"] = *cfg.a_background;
  return res;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

namespace detail {

/// Parameter value on [lo, hi] where lambda_PF crosses 1, if it does.
inline std::optional<double> bifurcation_point(const ParamSet& base, const std::string& param,
                                               double lo, double hi) {
  auto excess = [&](double v) {
    ParamSet q = base;
    q.values[param] = v;
    return r_rad(q.baseline()) - 1.0;
  };
  double flo = excess(lo), fhi = excess(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) return std::nullopt;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = excess(mid);
    if ((fm > 0.0) == (fhi > 0.0)) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

struct EquilibriumRow {
  double value = 0.0;
  SimplexState3 state;
  double lambda = 0.0;
  std::string attractor, classification;
  bool bifurcation = false;
};

inline EquilibriumRow equilibrium_row(const ParamSet& base, const std::string& param, double v,
                                      bool bifurcation) {
  ParamSet q = base;
  q.values[param] = v;
  const BaselineParams p = q.baseline();
  EquilibriumRow row;
  row.value = v;
  row.lambda = r_rad(p);
  row.bifurcation = bifurcation;
  const auto reports = equilibrium_reports(p);
  if (bifurcation) {
    row.attractor = "E0";
    row.classification = to_string(Stability::Nonhyperbolic);
  } else if (reports[1].exists) {
    row.attractor = "E1";
    row.state = reports[1].location;
    row.classification = to_string(reports[1].classification);
  } else {
    row.attractor = "E0";
    row.classification = to_string(reports[0].classification);
  }
  return row;
}

}  // namespace detail

inline RunResult run_sweep(const ScenarioConfig& cfg, OutputDir& out, unsigned workers = default_workers()) {
  const SweepAxis& ax = *cfg.sweep;
  const std::vector<double> grid = ax.grid();
  RunResult res;
  json panels = json::array();
  const std::string file = cfg.name + ".csv";

  if (ax.kind == "equilibrium") {
    csv::Table t({"panel", ax.param, "L_star", "R_star", "C_star", "lambda_pf", "attractor",
                  "classification", "bifurcation"});
    for (const Panel& panel : cfg.panels) {
      std::vector<detail::EquilibriumRow> rows(grid.size());
      parallel_for(
          grid.size(),
          [&](std::size_t i) { rows[i] = detail::equilibrium_row(panel.params, ax.param, grid[i], false); },
          workers);
      const auto bif = detail::bifurcation_point(panel.params, ax.param, ax.from, ax.to);
      if (bif) {
        const auto at = std::lower_bound(rows.begin(), rows.end(), *bif,
                                         [](const auto& r, double v) { return r.value < v; });
        rows.insert(at, detail::equilibrium_row(panel.params, ax.param, *bif, true));
      }
      for (const auto& r : rows) {
        t.add_row({panel.name, csv::format(r.value), csv::format(r.state.L), csv::format(r.state.R),
                   csv::format(r.state.C()), csv::format(r.lambda), r.attractor, r.classification,
                   r.bifurcation ? "1" : "0"});
      }
      json pj = {{"name", panel.name}, {"params", panel.params.to_json()}, {"points", rows.size()}};
      pj["bifurcation_point"] = bif ? json(*bif) : json(nullptr);
      panels.push_back(pj);
    }
    out.write(file, t);
  } else {
    csv::Table t({"panel", "delta_shock", "phi"});
    for (const Panel& panel : cfg.panels) {
      const FourGroupParams p = panel.params.four_group();
      const Matrix2 K = recruitment_matrix(p.base), M = decay_matrix(p.base), D = mobilisation_matrix(p);
      std::vector<double> values(grid.size());
      parallel_for(grid.size(), [&](std::size_t i) { values[i] = phi(grid[i], K, M, D); }, workers);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        t.add_row({panel.name, csv::format(grid[i]), csv::format(values[i])});
      }
      json pj = {{"name", panel.name}, {"params", panel.params.to_json()}, {"points", grid.size()},
                 {"phi_0", phi(0.0, K, M, D)}, {"phi_1", phi(1.0, K, M, D)}};
      pj["crossing"] = pj["phi_0"].get<double>() < 1.0 ? to_json(delta_c_asym(K, M, D)) : json(nullptr);
      panels.push_back(pj);
    }
    out.write(file, t);
  }
  res.summary = {{"scenario", cfg.name}, {"command", "sweep"}, {"kind", ax.kind},
                 {"param", ax.param}, {"file", file}, {"panels", panels}};
  return res;
}

// ---------------------------------------------------------------------------
// staircase
// ---------------------------------------------------------------------------

/// Terminal centrist share after the first k shocks of a sequence followed by
/// `horizon` time units without further shocks.
inline double simulated_floor(const FourGroupParams& p, const SimplexState4& s0,
                              const std::vector<ShockEvent>& shocks, std::size_t k,
                              IntegratorConfig cfg, double horizon) {
  const std::vector<ShockEvent> head(shocks.begin(), shocks.begin() + static_cast<long>(k));
  cfg.t_end = (k > 0 ? head.back().time : 0.0) + horizon;
  cfg.sample_interval = std::max(cfg.sample_interval, horizon / 20.0);
  const auto result = run_shock_sequence(p, s0, head, cfg);
  return result.first.final_state().C();
}

inline RunResult run_staircase(const ScenarioConfig& cfg, OutputDir& out, unsigned workers = default_workers()) {
  RunResult res;
  json panels = json::array();
  for (const Panel& panel : cfg.panels) {
    const FourGroupParams p = panel.params.four_group();
    const SimplexState4 s0 = panel.initial.front();
    const auto [traj, report] = run_shock_sequence(p, s0, panel.shocks, panel.integrator);
    const std::string base = cfg.name + "_" + panel.name;
    out.write(base + ".csv", detail::trajectory_table(traj, cfg.a_background));

    std::vector<double> simulated(report.shocks.size());
    parallel_for(
        report.shocks.size(),
        [&](std::size_t k) {
          simulated[k] = simulated_floor(p, s0, panel.shocks, k + 1, panel.integrator, cfg.floor_horizon);
        },
        workers);

    csv::Table t({"k", "t_k", "delta_k", "dbeta_k", "B_k", "r_rad", "regime", "floor",
                  "simulated_floor", "surge", "window"});
    json shocks = json::array();
    for (std::size_t k = 0; k < report.shocks.size(); ++k) {
      const ShockRecord& r = report.shocks[k];
      t.add_row({std::to_string(r.k), csv::format(r.time), csv::format(r.delta), csv::format(r.dbeta),
                 r.B ? csv::format(*r.B) : "", csv::format(r.r_rad_after), to_string(r.regime_after),
                 csv::format(r.floor), csv::format(simulated[k]), r.surge.surged ? "1" : "0",
                 r.window ? csv::format(*r.window) : ""});
      json sj = to_json(r);
      sj["simulated_floor"] = simulated[k];
      shocks.push_back(sj);
    }
    out.write(base + "_shocks.csv", t);
    json diags = json::array({to_json(invariance_check(traj)), to_json(a_decay_check(p, traj))});
    for (const auto& d : diags) res.ok = res.ok && d["pass"].get<bool>();
    json pj = {{"name", panel.name}, {"params", panel.params.to_json()}, {"initial", to_json(s0)},
               {"file", base + ".csv"}, {"shock_file", base + "_shocks.csv"},
               {"floor_horizon", cfg.floor_horizon}, {"shocks", shocks}, {"diagnostics", diags}};
    pj["k_star"] = report.k_star ? json(*report.k_star) : json(nullptr);
    panels.push_back(pj);
  }
  res.summary = {{"scenario", cfg.name}, {"command", "staircase"}, {"panels", panels}};
  return res;
}

// ---------------------------------------------------------------------------
// thresholds
// ---------------------------------------------------------------------------

inline RunResult run_thresholds(const ScenarioConfig& cfg) {
  RunResult res;
  json panels = json::array();
  for (const Panel& panel : cfg.panels) {
    json pj = {{"name", panel.name}, {"params", panel.params.to_json()}};
    if (cfg.model == ModelKind::Baseline) {
      pj["reference"] = detail::baseline_reference(panel.params);
    } else {
      const FourGroupParams p = panel.params.four_group();
      pj["reference"] = detail::four_group_reference(p);
      json windows = json::array();
      for (const ShockEvent& e : panel.shocks) {
        json w = {{"time", e.time}, {"delta", e.delta}};
        const FourGroupParams post = apply_structural(p, e);
        if (regime_of(post) == Regime::Subcritical) {
          const AsymWindow aw = window_bound_asym(e.delta, post);
          if (const auto* b = std::get_if<WindowBound>(&aw)) {
            w["delta_q"] = b->delta_q;
            w["t_q_star"] = b->t_q;
          } else {
            w["t_q_star"] = "monotone_decay";
          }
          if (auto beta = symmetric_beta(post); beta && post.delta_L > *beta) {
            const Threshold dc = delta_c_sym(*beta, post.base.mu_L, post.delta_L);
            if (!is_shock_proof(dc) && e.delta >= std::get<double>(dc)) {
              w["t_star"] = window_bound_sym(e.delta, *beta, post.base.mu_L, post.delta_L, post.rho);
            }
          }
        } else {
          w["regime"] = "supercritical";
        }
        windows.push_back(w);
      }
      pj["windows"] = windows;
    }
    panels.push_back(pj);
  }
  res.summary = {{"scenario", cfg.name}, {"command", "thresholds"}, {"panels", panels}};
  return res;
}

// ---------------------------------------------------------------------------
// germany
// ---------------------------------------------------------------------------

struct ElectionRecord {
  const char* year;
  double radical_vote_share;  // far-left plus far-right, fraction of valid votes
  double turnout;
};

/// Radical vote share and turnout for the Bundestag elections 2013-2025,
/// chosen to reproduce the published electorate fractions.
inline const std::vector<ElectionRecord>& bundestag_records() {
  static const std::vector<ElectionRecord> rows = {
      {"2013", 0.1329, 0.715},
      {"2017", 0.2178, 0.762},
      {"2021", 0.1514, 0.766},
      {"2025", 0.2964, 0.830},
  };
  return rows;
}

inline RunResult run_germany(const ScenarioConfig& cfg, OutputDir& out) {
  RunResult res;
  const double a_bg = cfg.a_background.value_or(0.170);
  const auto& cal = cfg.calibration;

  csv::Table rows({"year", "radical_vote_share", "turnout", "V", "C", "A", "total", "A_exc"});
  json jrows = json::array();
  std::vector<double> a_exc;
  bool sums_ok = true;
  for (const auto& rec : bundestag_records()) {
    const ElectorateRow r = proxy_decompose(rec.radical_vote_share, rec.turnout, rec.year);
    a_exc.push_back(r.A - a_bg);
    sums_ok = sums_ok && std::abs(r.total() - 1.0) <= kElectorateRowTol;
    rows.add_row({r.year, csv::format(rec.radical_vote_share), csv::format(rec.turnout), csv::format(r.V),
                  csv::format(r.C), csv::format(r.A), csv::format(r.total()), csv::format(a_exc.back())});
    jrows.push_back({{"year", r.year}, {"V", r.V}, {"C", r.C}, {"A", r.A}, {"total", r.total()},
                     {"A_exc", a_exc.back()}});
  }
  out.write("germany_rows.csv", rows);

  json floors = json::array();
  std::vector<double> dbetas;
  for (std::size_t k = 0; k < cal.betas.size(); ++k) {
    const double B = cal.betas[k];
    if (k > 0) dbetas.push_back(B - cal.betas[k - 1]);
    const double C = longrun_floor(B, cal.mu, true);
    json f = {{"k", k}, {"beta", B}, {"r_rad", B / cal.mu}, {"centrist_floor", C}, {"radical_floor", 1.0 - C}};
    if (k > 0) f["dbeta"] = dbetas.back();
    floors.push_back(f);
  }
  bool a_exc_monotone = true;
  for (std::size_t i = 1; i < a_exc.size(); ++i) a_exc_monotone = a_exc_monotone && a_exc[i] <= a_exc[i - 1];

  const auto& recs = bundestag_records();
  const double V2021 = recs[2].radical_vote_share * recs[2].turnout;
  const double V2025 = recs[3].radical_vote_share * recs[3].turnout;
  res.ok = sums_ok;
  res.summary = {{"scenario", cfg.name.empty() ? "table_germany" : cfg.name},
                 {"command", "germany"},
                 {"mu", cal.mu},
                 {"a_background", a_bg},
                 {"rows", jrows},
                 {"rows_sum_to_one", sums_ok},
                 {"floors", floors},
                 {"A_exc", a_exc},
                 {"A_exc_monotone", a_exc_monotone},
                 {"staircase_V2021_lt_V2025", V2021 < V2025}};
  if (cal.betas.front() < cal.mu) {
    const auto ks = kstar(cal.betas.front(), cal.mu, dbetas);
    res.summary["k_star"] = ks ? json(*ks) : json(nullptr);
  }
  return res;
}

/// Dispatches a parsed configuration, writes `<name>_summary.json` with the
/// file manifest, and returns the summary.
inline RunResult run(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                     unsigned workers = default_workers()) {
  OutputDir out(out_dir);
  RunResult res;
  if (cfg.command == "simulate") {
    res = run_simulate(cfg, out);
  } else if (cfg.command == "sweep") {
    res = run_sweep(cfg, out, workers);
  } else if (cfg.command == "staircase") {
    res = run_staircase(cfg, out, workers);
  } else if (cfg.command == "thresholds") {
    res = run_thresholds(cfg);
  } else if (cfg.command == "germany") {
    res = run_germany(cfg, out);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown command " + cfg.command);
  }
  res.summary["files"] = out.manifest();
  const std::string stem = cfg.name.empty() ? "table_germany" : cfg.name;
  out.write(stem + "_summary.json", res.summary);
  return res;
}

}  // namespace polarsim::scenario
