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

#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "polarsim/dynamics.hpp"
#include "polarsim/model.hpp"
#include "polarsim/spectral.hpp"

namespace polarsim {

/// Dead-band on dV/dt when classifying radical growth.
inline constexpr double kSurgeDeadBand = 1e-12;

// ---------------------------------------------------------------------------
// Shock application
// ---------------------------------------------------------------------------

/// Moves the fraction delta of centrists into disengagement:
/// C+ = (1 - delta) C-, A+ = A- + delta C-. L and R are untouched.
inline SimplexState4 apply_impulse(const SimplexState4& s, double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "impulse amplitude must lie in [0,1)");
  }
  const double C = std::max(0.0, s.C());
  return {s.L, s.R, s.A + delta * C};
}

/// Post-shock parameters. The replacement set wins when present; otherwise
/// dbeta is added to both reactive-polarisation rates, so beta -> beta + dbeta
/// for symmetric parameters.
inline FourGroupParams apply_structural(const FourGroupParams& p, const ShockEvent& shock) {
  if (shock.replacement) return validate_four_group(*shock.replacement);
  FourGroupParams q = p;
  q.base.gamma_RL += shock.dbeta;
  q.base.gamma_LR += shock.dbeta;
  return validate_four_group(q);
}

inline SymmetricParams apply_structural(const SymmetricParams& p, const ShockEvent& shock) {
  if (shock.replacement) {
    throw Error(ErrorCode::RegimeMismatch, "symmetric parameters cannot take a full replacement");
  }
  SymmetricParams q = p;
  q.gamma += shock.dbeta;
  return q.validated();
}

/// beta = alpha + gamma when the parameters are symmetric.
inline std::optional<double> symmetric_beta(const FourGroupParams& p) {
  if (!p.is_symmetric()) return std::nullopt;
  return p.base.alpha_L + p.base.gamma_RL;
}

// ---------------------------------------------------------------------------
// Closed-form thresholds
// ---------------------------------------------------------------------------

/// First 1-based index k with dbeta_1 + ... + dbeta_k > mu - beta0.
inline std::optional<std::size_t> kstar(double beta0, double mu, const std::vector<double>& dbetas) {
  if (beta0 >= mu) throw Error(ErrorCode::RegimeError, "kstar needs beta0 < mu");
  const double gap = mu - beta0;
  double sum = 0.0;
  for (std::size_t k = 0; k < dbetas.size(); ++k) {
    sum += dbetas[k];
    if (sum > gap) return k + 1;
  }
  return std::nullopt;
}

/// Long-run centrist share after a structural shift to B: mu/B for a seeded
/// supercritical system, full recovery otherwise.
inline double longrun_floor(double B, double mu, bool seeded) {
  detail::require_positive(B, "B");
  detail::require_positive(mu, "mu");
  return (seeded && B > mu) ? mu / B : 1.0;
}

/// Same floor for general parameters: 1 / R_rad when seeded and R_rad > 1.
inline double longrun_floor(const FourGroupParams& p, bool seeded) {
  const double r = r_rad(p.base);
  return (seeded && r > 1.0) ? 1.0 / r : 1.0;
}

/// Disengaged share above which a near-centrist state with per-wing share P0
/// has growing radical mass: (mu - beta + 2 beta P0) / (delta - beta).
inline double surge_threshold_exact(double P0, double beta, double mu, double delta) {
  if (!(P0 >= 0.0 && P0 <= 0.5)) throw Error(ErrorCode::OutOfRange, "P0 must lie in [0, 1/2]");
  detail::require_positive(beta, "beta");
  detail::require_positive(mu, "mu");
  detail::require_positive(delta, "delta");
  if (delta <= beta) throw Error(ErrorCode::FormulaInapplicable, "needs delta > beta");
  return (mu - beta + 2.0 * beta * P0) / (delta - beta);
}

/// Radicalisation window t* = ln(delta_shock / Delta_c) / rho in the
/// symmetric subcritical regime.
inline double window_bound_sym(double delta_shock, double beta, double mu, double delta,
                               double rho) {
  detail::require_positive(rho, "rho");
  if (!(delta_shock >= 0.0 && delta_shock < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "shock amplitude must lie in [0,1)");
  }
  const Threshold dc = delta_c_sym(beta, mu, delta);
  if (is_shock_proof(dc)) throw Error(ErrorCode::BelowThreshold, "system is shock-proof");
  const double delta_c = std::get<double>(dc);
  if (std::abs(delta_shock - delta_c) <= 1e-12 * delta_c) return 0.0;
  if (delta_shock < delta_c) {
    throw Error(ErrorCode::BelowThreshold, "shock amplitude below Delta_c");
  }
  return std::log(delta_shock / delta_c) / rho;
}

struct MonotoneDecay {
  friend bool operator==(MonotoneDecay, MonotoneDecay) { return true; }
};

struct WindowBound {
  double delta_q;  // amplitude below which q-weighted radical mass decays
  double t_q;      // bound on the duration of its growth
};

using AsymWindow = std::variant<WindowBound, MonotoneDecay>;

/// Window bound from the left Perron vector q of K - M:
/// kappa = max_i (q^T (D - K))_i / q_i, Delta_q = -s0 / kappa,
/// t_q = ln(delta_shock / Delta_q) / rho.
inline AsymWindow window_bound_asym(double delta_shock, const FourGroupParams& p) {
  validate_four_group(p);
  if (!(delta_shock >= 0.0 && delta_shock < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "shock amplitude must lie in [0,1)");
  }
  const Matrix2 K = recruitment_matrix(p.base);
  const Matrix2 G = K - decay_matrix(p.base);
  const PerronData pd = metzler_perron(G);
  const double s0 = pd.lambda_pf;
  if (s0 >= 0.0) throw Error(ErrorCode::BaselineSupercritical, "s(K - M) >= 0");
  const Vector2& q = pd.left;
  const Vector2 w = left_multiply(q, mobilisation_matrix(p) - K);
  const double kappa = std::max(w[0] / q[0], w[1] / q[1]);
  if (kappa <= 0.0) return MonotoneDecay{};
  const double delta_q = -s0 / kappa;
  if (delta_shock <= delta_q) return MonotoneDecay{};
  return WindowBound{delta_q, std::log(delta_shock / delta_q) / p.rho};
}

// ---------------------------------------------------------------------------
// Surge detection
// ---------------------------------------------------------------------------

struct SurgeInfo {
  bool surged = false;                  // dV/dt > dead-band at some sample
  std::optional<double> end_time;       // last + to - crossing of dV/dt
  double peak_V = 0.0;
  double peak_time = 0.0;
};

/// Scans samples [first, last) of a four-group trajectory for growth of the
/// radical mass V = L + R. Crossing times are interpolated linearly.
inline SurgeInfo detect_surge(const Trajectory4& traj, std::size_t first, std::size_t last) {
  SurgeInfo info;
  if (first >= last) return info;
  int last_sign = 0;
  double prev_d = 0.0, prev_t = 0.0;
  info.peak_V = -1.0;
  for (std::size_t i = first; i < last; ++i) {
    const SimplexState4& s = traj.states[i];
    const Vector3 f = rhs_4group(traj.regimes[traj.regime_of_sample[i]], s);
    const double d = f[0] + f[1];
    const double t = traj.times[i];
    if (s.L + s.R > info.peak_V) {
      info.peak_V = s.L + s.R;
      info.peak_time = t;
    }
    const int sign = d > kSurgeDeadBand ? 1 : (d < -kSurgeDeadBand ? -1 : 0);
    if (sign > 0) info.surged = true;
    if (sign < 0 && last_sign > 0) {
      info.end_time = (prev_d > 0.0 && t > prev_t) ? prev_t + (t - prev_t) * prev_d / (prev_d - d)
                                                    : t;
    }
    if (sign != 0) {
      last_sign = sign;
      prev_d = d;
      prev_t = t;
    }
  }
  return info;
}

// ---------------------------------------------------------------------------
// Shock sequences
// ---------------------------------------------------------------------------

enum class Regime { Subcritical, Supercritical };

inline const char* to_string(Regime r) {
  return r == Regime::Subcritical ? "subcritical" : "supercritical";
}

inline Regime regime_of(const FourGroupParams& p) {
  return r_rad(p.base) > 1.0 ? Regime::Supercritical : Regime::Subcritical;
}

struct ShockRecord {
  std::size_t k = 0;  // 1-based
  double time = 0.0;
  double delta = 0.0;
  double dbeta = 0.0;
  std::optional<double> B;  // cumulative beta, symmetric parameters only
  double r_rad_before = 0.0;
  double r_rad_after = 0.0;
  Regime regime_before = Regime::Subcritical;
  Regime regime_after = Regime::Subcritical;
  SimplexState4 pre;
  SimplexState4 post;
  bool seeded = false;
  double floor = 1.0;
  SurgeInfo surge;
  std::optional<double> window;  // t* or t_q*, relative to the shock time
};

struct ShockSequenceReport {
  std::vector<ShockRecord> shocks;
  std::optional<std::size_t> k_star;
};

namespace detail {

inline void check_shock_times(const std::vector<ShockEvent>& shocks, double t_end) {
  double prev = -1.0;
  for (const ShockEvent& e : shocks) {
    e.validated();
    if (!(e.time >= 0.0 && e.time <= t_end)) {
      throw Error(ErrorCode::OutOfRange, "shock time outside [0, t_end]");
    }
    if (!(e.time > prev)) throw Error(ErrorCode::OutOfRange, "shock times must increase strictly");
    prev = e.time;
  }
}

inline std::optional<double> window_for(const FourGroupParams& p, double amplitude) {
  if (regime_of(p) == Regime::Supercritical || amplitude >= 1.0) return std::nullopt;
  if (auto beta = symmetric_beta(p)) {
    const double mu = p.base.mu_L, delta = p.delta_L;
    if (*beta >= mu || delta <= *beta) return std::nullopt;
    const Threshold dc = delta_c_sym(*beta, mu, delta);
    if (is_shock_proof(dc) || amplitude < std::get<double>(dc)) return std::nullopt;
    return window_bound_sym(amplitude, *beta, mu, delta, p.rho);
  }
  const AsymWindow w = window_bound_asym(amplitude, p);
  if (const auto* b = std::get_if<WindowBound>(&w)) return b->t_q;
  return std::nullopt;
}

}  // namespace detail

/// Integrates piecewise between shocks. At each shock the pre-shock sample is
/// recorded, the impulse and then the structural change are applied, and the
/// post-shock sample is recorded at the same time with an event marker.
inline std::pair<Trajectory4, ShockSequenceReport> run_shock_sequence(
    const FourGroupParams& p0, const SimplexState4& s0, const std::vector<ShockEvent>& shocks,
    const IntegratorConfig& cfg) {
  validate_four_group(p0);
  detail::check_shock_times(shocks, cfg.t_end);

  Trajectory4 traj;
  traj.regimes.push_back(p0);
  SimplexState4 x = project_to_simplex(s0);
  traj.push(0.0, x, 0);
  SimplexIntegrator<3> stepper(cfg);
  double t = 0.0;

  auto run_until = [&](double t1) {
    if (t1 <= t) return;
    const FourGroupParams& p = traj.regimes.back();
    const std::size_t regime = traj.regimes.size() - 1;
    auto field = [&p](const Vector3& v) { return FourGroupModel::rhs(p, v); };
    const Vector3 end = stepper.advance(field, FourGroupModel::to_array(x), t, t1,
                                        [&](double ts, const Vector3& v) {
                                          traj.push(ts, FourGroupModel::from_array(v), regime);
                                        });
    x = FourGroupModel::from_array(end);
    t = t1;
  };

  ShockSequenceReport report;
  for (std::size_t k = 0; k < shocks.size(); ++k) {
    const ShockEvent& e = shocks[k];
    run_until(e.time);
    const FourGroupParams before = traj.regimes.back();
    const FourGroupParams after = apply_structural(before, e);

    ShockRecord rec;
    rec.k = k + 1;
    rec.time = e.time;
    rec.delta = e.delta;
    rec.dbeta = e.dbeta;
    rec.pre = x;
    x = apply_impulse(x, e.delta);
    rec.post = x;
    rec.r_rad_before = r_rad(before.base);
    rec.r_rad_after = r_rad(after.base);
    rec.regime_before = regime_of(before);
    rec.regime_after = regime_of(after);
    rec.B = symmetric_beta(after);
    rec.seeded = x.L + x.R > 0.0;
    rec.floor = rec.B ? longrun_floor(*rec.B, after.base.mu_L, rec.seeded)
                      : longrun_floor(after, rec.seeded);
    rec.window = detail::window_for(after, std::max(e.delta, x.A));

    traj.regimes.push_back(after);
    traj.push(e.time, x, traj.regimes.size() - 1);
    traj.events.push_back({e.time, traj.size() - 1, e});
    stepper.reset();
    report.shocks.push_back(rec);
  }
  run_until(cfg.t_end);

  for (std::size_t k = 0; k < report.shocks.size(); ++k) {
    const std::size_t first = traj.events[k].sample;
    const std::size_t last =
        k + 1 < traj.events.size() ? traj.events[k + 1].sample - 1 : traj.size();
    report.shocks[k].surge = detect_surge(traj, first, last);
  }

  if (regime_of(p0) == Regime::Subcritical) {
    const auto beta0 = symmetric_beta(p0);
    bool channel_symmetric = beta0.has_value();
    std::vector<double> dbetas;
    for (const ShockEvent& e : shocks) {
      channel_symmetric = channel_symmetric && !e.replacement;
      dbetas.push_back(e.dbeta);
    }
    if (channel_symmetric && *beta0 < p0.base.mu_L) {
      report.k_star = kstar(*beta0, p0.base.mu_L, dbetas);
    } else {
      for (const ShockRecord& r : report.shocks) {
        if (r.regime_after == Regime::Supercritical) {
          report.k_star = r.k;
          break;
        }
      }
    }
  }
  return {std::move(traj), std::move(report)};
}

}  // namespace polarsim
