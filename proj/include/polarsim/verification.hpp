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
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <vector>

#include "polarsim/diagnostics.hpp"
#include "polarsim/dynamics.hpp"
#include "polarsim/equilibria.hpp"
#include "polarsim/parallel.hpp"
#include "polarsim/random.hpp"
#include "polarsim/shocks.hpp"

namespace polarsim {

using BaselineField = std::function<Vector2(const BaselineParams&, const SimplexState3&)>;

struct VerifyOptions {
  std::uint64_t seed = 20260101;
  std::size_t draws = 100;  // parameter draws; other suites scale with it
  unsigned workers = default_workers();
  BaselineField baseline_field = rhs_baseline;  // replaced in mutation tests
};

// ---------------------------------------------------------------------------
// Random draws
// ---------------------------------------------------------------------------

inline BaselineParams random_baseline(Rng& rng, double lo = 0.01, double hi = 1.0) {
  std::array<double, 6> raw{};
  for (double& v : raw) v = rng.uniform(lo, hi);
  return validate_baseline(raw);
}

inline FourGroupParams random_four_group(Rng& rng, double lo = 0.01, double hi = 1.0) {
  return validate_four_group(
      {random_baseline(rng, lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
}

inline FourGroupParams random_symmetric_four_group(Rng& rng, double lo = 0.01, double hi = 1.0) {
  SymmetricParams s;
  s.alpha = rng.uniform(lo, hi);
  s.gamma = rng.uniform(lo, hi);
  s.mu = rng.uniform(lo, hi);
  s.delta = rng.uniform(lo, hi);
  s.rho = rng.uniform(lo, hi);
  return s.validated().to_four_group();
}

/// Uniform point of the 2-simplex with every share (L, R, C) at least `margin`.
inline SimplexState3 random_state3(Rng& rng, double margin = 0.0) {
  for (;;) {
    double u = rng.uniform01(), v = rng.uniform01();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const SimplexState3 s{u, v};
    if (s.L >= margin && s.R >= margin && s.C() >= margin) return s;
  }
}

/// Uniform point of the 3-simplex (sorted-uniforms construction).
inline SimplexState4 random_state4(Rng& rng) {
  std::array<double, 3> u{rng.uniform01(), rng.uniform01(), rng.uniform01()};
  std::sort(u.begin(), u.end());
  return project_to_simplex(SimplexState4{u[0], u[1] - u[0], u[2] - u[1]});
}

// ---------------------------------------------------------------------------
// Report aggregation
// ---------------------------------------------------------------------------

namespace detail {

/// Thread-safe accumulator keeping the worst item report.
class ReportMerger {
 public:
  ReportMerger(std::string name, bool higher_is_worse)
      : higher_is_worse_(higher_is_worse) {
    total_.name = std::move(name);
    total_.worst = higher_is_worse ? -std::numeric_limits<double>::infinity()
                                   : std::numeric_limits<double>::infinity();
  }

  void add(const DiagnosticReport& r) {
    std::lock_guard lock(mutex_);
    total_.samples += r.samples;
    const bool worse = higher_is_worse_ ? r.worst > total_.worst : r.worst < total_.worst;
    if (!r.pass && total_.pass) {
      total_.pass = false;
      total_.worst = r.worst;
      total_.witness = r.witness;
      total_.detail = r.detail;
    } else if (worse && (r.pass == total_.pass)) {
      total_.worst = r.worst;
      if (!r.pass) {
        total_.witness = r.witness;
        total_.detail = r.detail;
      }
    }
  }

  void fail(std::string detail, std::vector<double> witness) {
    std::lock_guard lock(mutex_);
    if (total_.pass) {
      total_.pass = false;
      total_.detail = std::move(detail);
      total_.witness = std::move(witness);
    }
  }

  DiagnosticReport result() const { return total_; }

 private:
  bool higher_is_worse_;
  std::mutex mutex_;
  DiagnosticReport total_;
};

inline std::vector<double> param_witness(const BaselineParams& p) {
  const auto a = p.as_array();
  return {a.begin(), a.end()};
}

inline std::vector<double> param_witness(const FourGroupParams& p) {
  std::vector<double> w = param_witness(p.base);
  w.insert(w.end(), {p.delta_L, p.delta_R, p.rho});
  return w;
}

inline Trajectory3 integrate_field(const BaselineField& field, const BaselineParams& p,
                                   const SimplexState3& s0, const IntegratorConfig& cfg) {
  Trajectory3 traj;
  traj.regimes.push_back(p);
  const SimplexState3 start = project_to_simplex(s0);
  traj.push(0.0, start, 0);
  SimplexIntegrator<2> stepper(cfg);
  auto f = [&](const Vector2& x) { return field(p, SimplexState3{x[0], x[1]}); };
  stepper.advance(f, Vector2{start.L, start.R}, 0.0, cfg.t_end,
                  [&traj](double t, const Vector2& x) { traj.push(t, {x[0], x[1]}, 0); });
  return traj;
}

enum Task : std::uint64_t {
  kTaskDulac = 1,
  kTaskJacobian,
  kTaskInflow,
  kTaskTrajectories,
  kTaskSeed,
  kTaskAudit,
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

/// Closed-form Dulac divergence at 10^4 interior points for each parameter
/// draw, plus the sign of the finite-difference divergence of the configured
/// field at 10^3 points per draw.
inline std::vector<DiagnosticReport> verify_dulac(const VerifyOptions& o) {
  const std::size_t draws = o.draws;
  detail::ReportMerger closed("dulac_closed_form", true), field("dulac_field", true);
  parallel_for(
      draws,
      [&](std::size_t i) {
        Rng rng = Rng::stream(o.seed, detail::kTaskDulac, i);
        const BaselineParams p = random_baseline(rng);
        std::vector<SimplexState3> points(10000);
        for (auto& s : points) s = random_state3(rng, kInteriorMargin);
        closed.add(dulac_audit([&p](const SimplexState3& s) { return dulac_divergence(p, s); },
                               points));
        points.resize(1000);
        field.add(dulac_audit(
            [&](const SimplexState3& s) {
              return numeric_dulac_divergence(
                  [&](const SimplexState3& x) { return o.baseline_field(p, x); }, s);
            },
            points));
      },
      o.workers);
  return {closed.result(), field.result()};
}

/// Analytic Jacobians against central differences, both models.
inline DiagnosticReport verify_jacobians(const VerifyOptions& o) {
  const std::size_t draws = o.draws;
  detail::ReportMerger merged("jacobian_fd", true);
  parallel_for(
      draws,
      [&](std::size_t i) {
        Rng rng = Rng::stream(o.seed, detail::kTaskJacobian, i);
        const FourGroupParams p = random_four_group(rng);
        DiagnosticReport r;
        r.worst = 0.0;
        for (int k = 0; k < 100; ++k) {
          const SimplexState3 s3 = random_state3(rng);
          const SimplexState4 s4 = random_state4(rng);
          const double e = std::max(jacobian_fd_error(p.base, s3), jacobian_fd_error(p, s4));
          r.samples += 2;
          if (e > r.worst) {
            r.worst = e;
            if (e >= 1e-6) {
              r.pass = false;
              r.witness = {s4.L, s4.R, s4.A};
            }
          }
        }
        merged.add(r);
      },
      o.workers);
  return merged.result();
}

inline DiagnosticReport verify_boundary_inflow(const VerifyOptions& o) {
  const std::size_t draws = o.draws;
  detail::ReportMerger merged("boundary_inflow", false);
  parallel_for(
      draws,
      [&](std::size_t i) {
        Rng rng = Rng::stream(o.seed, detail::kTaskInflow, i);
        const FourGroupParams p = random_four_group(rng);
        merged.add(boundary_inflow_check_field(
            [&](const SimplexState3& s) { return o.baseline_field(p.base, s); }, 200));
        merged.add(boundary_inflow_check(p, 40));
      },
      o.workers);
  return merged.result();
}

/// 10 random trajectories per parameter draw (half three-group, half four-group, a
/// quarter of the latter symmetric): forward invariance on all of them,
/// Lyapunov monotonicity on the subcritical ones, the exponential bound on A
/// on every four-group run.
inline std::vector<DiagnosticReport> verify_trajectories(const VerifyOptions& o) {
  const std::size_t runs = 10 * o.draws;
  detail::ReportMerger invariance("forward_invariance", true);
  detail::ReportMerger lyapunov("lyapunov_monotone", true);
  detail::ReportMerger decay("a_decay", true);
  IntegratorConfig cfg;
  cfg.t_end = 60.0;
  cfg.sample_interval = 0.25;
  parallel_for(
      runs,
      [&](std::size_t i) {
        Rng rng = Rng::stream(o.seed, detail::kTaskTrajectories, i);
        try {
          if (i % 2 == 0) {
            const BaselineParams p = random_baseline(rng);
            const Trajectory3 traj = detail::integrate_field(o.baseline_field, p, random_state3(rng), cfg);
            invariance.add(invariance_check(traj));
            if (r_rad(p) <= 1.0) {
              lyapunov.add(lyapunov_trace(LyapunovKind::SubcriticalBaseline, p, traj));
            }
          } else {
            const FourGroupParams p =
                i % 4 == 1 ? random_symmetric_four_group(rng) : random_four_group(rng);
            const Trajectory4 traj = integrate(p, random_state4(rng), cfg);
            invariance.add(invariance_check(traj));
            decay.add(a_decay_check(p, traj));
            if (r_rad(p.base) <= 1.0) {
              lyapunov.add(lyapunov_trace(LyapunovKind::Subcritical4Group, p, traj));
              if (p.is_symmetric()) {
                lyapunov.add(lyapunov_trace(LyapunovKind::Symmetric4Group, p, traj));
              }
            }
          }
        } catch (const Error& e) {
          invariance.fail(std::string("run ") + std::to_string(i) + ": " + e.what(), {});
        }
      },
      o.workers);
  return {invariance.result(), lyapunov.result(), decay.result()};
}

/// Symmetric four-group runs started on the axis L = R = 0 under random
/// shock sequences: the radical mass must stay below 1e-12.
inline DiagnosticReport verify_seed_invariance(const VerifyOptions& o) {
  const std::size_t runs = std::max<std::size_t>(1, o.draws / 5);
  detail::ReportMerger merged("seed_invariance", true);
  IntegratorConfig cfg;
  cfg.t_end = 100.0;
  cfg.sample_interval = 0.5;
  parallel_for(
      runs,
      [&](std::size_t i) {
        Rng rng = Rng::stream(o.seed, detail::kTaskSeed, i);
        const FourGroupParams p = random_symmetric_four_group(rng);
        std::vector<ShockEvent> shocks;
        for (double t = 10.0; t < cfg.t_end; t += 20.0) {
          ShockEvent e;
          e.time = t;
          e.delta = rng.uniform(0.0, 0.95);
          e.dbeta = rng.uniform(0.0, 0.5);
          shocks.push_back(e);
        }
        const auto [traj, report] =
            run_shock_sequence(p, {0.0, 0.0, rng.uniform(0.0, 0.9)}, shocks, cfg);
        DiagnosticReport r;
        for (std::size_t k = 0; k < traj.size(); ++k) {
          const double P = traj.states[k].L + traj.states[k].R;
          ++r.samples;
          if (P > r.worst) r.worst = P;
          if (!(P < 1e-12)) {
            r.pass = false;
            r.witness = {traj.times[k], P};
          }
        }
        merged.add(r);
      },
      o.workers);
  return merged.result();
}

/// For draws / 20 baseline parameter sets with a well-separated attractor,
/// 50 random interior initial conditions must all end within 1e-4 of the
/// analytic attractor.
inline DiagnosticReport verify_no_bistability(const VerifyOptions& o) {
  const std::size_t draws = std::max<std::size_t>(1, o.draws / 20);
  detail::ReportMerger merged("no_bistability", true);
  IntegratorConfig cfg;
  cfg.t_end = 2000.0;
  cfg.sample_interval = 50.0;
  parallel_for(
      draws * 50,
      [&](std::size_t job) {
        const std::size_t d = job / 50;
        Rng prng = Rng::stream(o.seed, detail::kTaskAudit, d);
        BaselineParams p;
        SimplexState3 target;
        for (;;) {
          p = random_baseline(prng, 0.05, 1.0);
          const auto reports = equilibrium_reports(p);
          const auto& attractor = reports[1].exists ? reports[1] : reports[0];
          double slowest = -std::numeric_limits<double>::infinity();
          for (const auto& z : attractor.eigenvalues) slowest = std::max(slowest, z.real());
          if (slowest < -0.02) {
            target = attractor.location;
            break;
          }
        }
        Rng rng = Rng::stream(o.seed, detail::kTaskAudit, 1'000'000 + job);
        DiagnosticReport r;
        r.samples = 1;
        try {
          const Trajectory3 traj =
              detail::integrate_field(o.baseline_field, p, random_state3(rng, 1e-3), cfg);
          r.worst = max_distance(traj.final_state(), target);
        } catch (const Error& e) {
          r.worst = std::numeric_limits<double>::infinity();
          r.detail = std::string("job ") + std::to_string(job) + ": " + e.what();
        }
        if (!(r.worst <= 1e-4)) {
          r.pass = false;
          r.witness = detail::param_witness(p);
        }
        merged.add(r);
      },
      o.workers);
  return merged.result();
}

inline std::vector<DiagnosticReport> run_verify_suite(const VerifyOptions& o) {
  std::vector<DiagnosticReport> all = verify_dulac(o);
  all.push_back(verify_jacobians(o));
  all.push_back(verify_boundary_inflow(o));
  for (auto& r : verify_trajectories(o)) all.push_back(std::move(r));
  all.push_back(verify_seed_invariance(o));
  all.push_back(verify_no_bistability(o));
  return all;
}

inline bool all_pass(const std::vector<DiagnosticReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.pass; });
}

}  // namespace polarsim
