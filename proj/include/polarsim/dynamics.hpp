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
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "polarsim/error.hpp"
#include "polarsim/model.hpp"
#include "polarsim/spectral.hpp"

namespace polarsim {

using Vector3 = std::array<double, 3>;
using Matrix3 = std::array<std::array<double, 3>, 3>;

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

inline Vector2 rhs_baseline(const BaselineParams& p, const SimplexState3& s) {
  const double C = s.C();
  return {p.alpha_L * s.L * C - p.mu_L * s.L + p.gamma_RL * s.R * C,
          p.alpha_R * s.R * C - p.mu_R * s.R + p.gamma_LR * s.L * C};
}

/// Post-shock four-group field (no continuous forcing).
inline Vector3 rhs_4group(const FourGroupParams& p, const SimplexState4& s) {
  const BaselineParams& b = p.base;
  const double C = s.C();
  return {b.alpha_L * s.L * C + b.gamma_RL * s.R * C + p.delta_L * s.A * s.L - b.mu_L * s.L,
          b.alpha_R * s.R * C + b.gamma_LR * s.L * C + p.delta_R * s.A * s.R - b.mu_R * s.R,
          -p.delta_L * s.A * s.L - p.delta_R * s.A * s.R - p.rho * s.A};
}

/// Jacobian of rhs_baseline in (L, R), with C = 1 - L - R substituted.
inline Matrix2 jacobian_baseline(const BaselineParams& p, const SimplexState3& s) {
  const double C = s.C();
  return {p.alpha_L * (C - s.L) - p.mu_L - p.gamma_RL * s.R,
          p.gamma_RL * (C - s.R) - p.alpha_L * s.L,
          p.gamma_LR * (C - s.L) - p.alpha_R * s.R,
          p.alpha_R * (C - s.R) - p.mu_R - p.gamma_LR * s.L};
}

/// Jacobian of rhs_4group in (L, R, A), with C = 1 - L - R - A substituted.
inline Matrix3 jacobian_4group(const FourGroupParams& p, const SimplexState4& s) {
  const BaselineParams& b = p.base;
  const double C = s.C();
  Matrix3 J{};
  J[0][0] = b.alpha_L * (C - s.L) - b.gamma_RL * s.R + p.delta_L * s.A - b.mu_L;
  J[0][1] = b.gamma_RL * (C - s.R) - b.alpha_L * s.L;
  J[0][2] = (p.delta_L - b.alpha_L) * s.L - b.gamma_RL * s.R;
  J[1][0] = b.gamma_LR * (C - s.L) - b.alpha_R * s.R;
  J[1][1] = b.alpha_R * (C - s.R) - b.gamma_LR * s.L + p.delta_R * s.A - b.mu_R;
  J[1][2] = (p.delta_R - b.alpha_R) * s.R - b.gamma_LR * s.L;
  J[2][0] = -p.delta_L * s.A;
  J[2][1] = -p.delta_R * s.A;
  J[2][2] = -(p.delta_L * s.L + p.delta_R * s.R + p.rho);
  return J;
}

/// Reduced symmetric four-group system on the diagonal L = R = P:
/// P' = P[(beta - mu) - 2 beta P + (delta - beta) A],  A' = -(2 delta P + rho) A.
struct SymmetricReduced {
  double beta, mu, delta, rho;

  static SymmetricReduced from(const SymmetricParams& s) {
    const SymmetricParams v = s.validated();
    if (!v.delta || !v.rho) {
      throw Error(ErrorCode::NonPositiveParameter, "reduced system needs delta and rho");
    }
    return {v.beta(), v.mu, *v.delta, *v.rho};
  }

  Vector2 rhs(double P, double A) const {
    return {P * ((beta - mu) - 2.0 * beta * P + (delta - beta) * A),
            -(2.0 * delta * P + rho) * A};
  }

  Matrix2 jacobian(double P, double A) const {
    return {(beta - mu) - 4.0 * beta * P + (delta - beta) * A, (delta - beta) * P,
            -2.0 * delta * A, -(2.0 * delta * P + rho)};
  }
};

// ---------------------------------------------------------------------------
// Model traits consumed by the integrator and the shock engine
// ---------------------------------------------------------------------------

struct BaselineModel {
  using Params = BaselineParams;
  using State = SimplexState3;
  static constexpr std::size_t dim = 2;

  static std::array<double, dim> to_array(const State& s) { return {s.L, s.R}; }
  static State from_array(const std::array<double, dim>& x) { return {x[0], x[1]}; }
  static std::array<double, dim> rhs(const Params& p, const std::array<double, dim>& x) {
    return rhs_baseline(p, from_array(x));
  }
};

struct FourGroupModel {
  using Params = FourGroupParams;
  using State = SimplexState4;
  static constexpr std::size_t dim = 3;

  static std::array<double, dim> to_array(const State& s) { return {s.L, s.R, s.A}; }
  static State from_array(const std::array<double, dim>& x) { return {x[0], x[1], x[2]}; }
  static std::array<double, dim> rhs(const Params& p, const std::array<double, dim>& x) {
    return rhs_4group(p, from_array(x));
  }
};

// ---------------------------------------------------------------------------
// Integrator
// ---------------------------------------------------------------------------

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 0.05;
  double t_end = 200.0;
  double sample_interval = 0.1;
  std::size_t max_steps = 50'000'000;
  /// Stop once ||F||_inf < equilibrium_tol and hold the state. Off by default:
  /// near a saddle with a tiny radical seed the field is also tiny.
  bool stop_at_equilibrium = false;
  double equilibrium_tol = 1e-10;

  IntegratorConfig validated() const {
    if (!(rel_tol > 0.0 && abs_tol > 0.0)) {
      throw Error(ErrorCode::OutOfRange, "integrator tolerances must be positive");
    }
    if (!(max_step > 0.0)) throw Error(ErrorCode::OutOfRange, "max_step must be positive");
    if (!(sample_interval > 0.0)) {
      throw Error(ErrorCode::OutOfRange, "sample_interval must be positive");
    }
    return *this;
  }
};

/// Samples of a piecewise-autonomous run. At a shock the pre-shock and
/// post-shock states are both recorded with the same timestamp; within a
/// segment times are strictly increasing.
template <class Model>
struct Trajectory {
  using State = typename Model::State;
  using Params = typename Model::Params;

  struct Event {
    double time;
    std::size_t sample;  // index of the post-shock sample
    ShockEvent shock;
  };

  std::vector<double> times;
  std::vector<State> states;
  std::vector<std::size_t> regime_of_sample;
  std::vector<Params> regimes;
  std::vector<Event> events;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  const State& final_state() const { return states.back(); }
  double final_time() const { return times.back(); }

  void push(double t, const State& s, std::size_t regime) {
    times.push_back(t);
    states.push_back(s);
    regime_of_sample.push_back(regime);
  }
};

using Trajectory3 = Trajectory<BaselineModel>;
using Trajectory4 = Trajectory<FourGroupModel>;

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DormandPrince54 {
  static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                          a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                          a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
  static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                          a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
  // Fifth-order weights minus embedded fourth-order weights.
  static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                          e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
};

// PI step-size controller constants.
inline constexpr double kSafety = 0.9;
inline constexpr double kMinFactor = 0.2;
inline constexpr double kMaxFactor = 5.0;
inline constexpr double kAlpha = 0.17;  // 1/5 - 0.75 * kBeta
inline constexpr double kBeta = 0.04;

}  // namespace detail

/// Adaptive embedded Runge-Kutta 5(4) integrator with PI step control for an
/// autonomous system x' = field(x) on a simplex. The state is projected back
/// onto the simplex after each accepted step (drift above kProjectionTol is
/// an error).
template <std::size_t N>
class SimplexIntegrator {
 public:
  using Vec = std::array<double, N>;

  explicit SimplexIntegrator(const IntegratorConfig& cfg) : cfg_(cfg.validated()) {}

  /// Advances x from t0 to t1, calling on_sample(t, x) at every grid time
  /// k * sample_interval in (t0, t1) and once at t1. Returns the state at t1.
  template <class Field, class OnSample>
  Vec advance(Field&& field, Vec x, double t0, double t1, OnSample&& on_sample) {
    if (!(t1 >= t0)) throw Error(ErrorCode::OutOfRange, "integration interval reversed");
    if (t1 == t0) return x;
    const double dt = cfg_.sample_interval;
    auto k_next = static_cast<long long>(std::floor(t0 / dt)) + 1;
    // Skip grid points numerically equal to t0.
    while (k_next * dt <= t0 * (1.0 + 1e-14) + 1e-14) ++k_next;

    double t = t0;
    Vec k1 = field(x);
    if (h_ <= 0.0) h_ = initial_step(field, x, k1);
    bool held = false;
    while (t < t1) {
      const double target = std::min(t1, static_cast<double>(k_next) * dt);
      if (!held) {
        if (cfg_.stop_at_equilibrium && inf_norm(k1) < cfg_.equilibrium_tol) {
          held = true;
        } else {
          step_to(field, x, k1, t, target);
        }
      }
      if (held) t = target;
      if (target < t1) {
        on_sample(t, x);
        ++k_next;
      }
    }
    on_sample(t1, x);
    return x;
  }

  std::size_t accepted_steps() const { return accepted_; }
  std::size_t rejected_steps() const { return rejected_; }

  /// Drops the step-size history, e.g. after a jump in the state.
  void reset() {
    h_ = 0.0;
    err_prev_ = 1e-4;
  }

 private:
  static double inf_norm(const Vec& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
  }

  template <class Field>
  double initial_step(Field& field, const Vec& x, const Vec& f0) const {
    // Hairer-Norsett-Wanner starting step estimate.
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(x[i]);
      d0 = std::max(d0, std::abs(x[i]) / sc);
      d1 = std::max(d1, std::abs(f0[i]) / sc);
    }
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, cfg_.max_step);
    Vec x1;
    for (std::size_t i = 0; i < N; ++i) x1[i] = x[i] + h0 * f0[i];
    const Vec f1 = field(x1);
    double d2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(x[i]);
      d2 = std::max(d2, std::abs(f1[i] - f0[i]) / sc / h0);
    }
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                : std::pow(0.01 / std::max(d1, d2), 0.2);
    return std::min({100.0 * h0, h1, cfg_.max_step});
  }

  // Takes accepted steps from t until exactly `target`.
  template <class Field>
  void step_to(Field& field, Vec& x, Vec& k1, double& t, double target) {
    using T = detail::DormandPrince54;
    while (t < target) {
      if (accepted_ + rejected_ > cfg_.max_steps) {
        throw Error(ErrorCode::StepSizeUnderflow, "step budget exhausted");
      }
      const double remaining = target - t;
      bool clipped = false;
      double h = std::min(h_, cfg_.max_step);
      if (h >= remaining) {
        h = remaining;
        clipped = true;
      }
      if (h < 1e-14 * std::max(1.0, std::abs(t)) && !clipped) {
        throw Error(ErrorCode::StepSizeUnderflow,
                    "step size " + std::to_string(h) + " at t = " + std::to_string(t));
      }

      Vec y, k2, k3, k4, k5, k6, k7;
      for (std::size_t i = 0; i < N; ++i) y[i] = x[i] + h * T::a21 * k1[i];
      k2 = field(y);
      for (std::size_t i = 0; i < N; ++i) y[i] = x[i] + h * (T::a31 * k1[i] + T::a32 * k2[i]);
      k3 = field(y);
      for (std::size_t i = 0; i < N; ++i)
        y[i] = x[i] + h * (T::a41 * k1[i] + T::a42 * k2[i] + T::a43 * k3[i]);
      k4 = field(y);
      for (std::size_t i = 0; i < N; ++i)
        y[i] = x[i] + h * (T::a51 * k1[i] + T::a52 * k2[i] + T::a53 * k3[i] + T::a54 * k4[i]);
      k5 = field(y);
      for (std::size_t i = 0; i < N; ++i)
        y[i] = x[i] + h * (T::a61 * k1[i] + T::a62 * k2[i] + T::a63 * k3[i] + T::a64 * k4[i] +
                           T::a65 * k5[i]);
      k6 = field(y);
      Vec x_new;
      for (std::size_t i = 0; i < N; ++i)
        x_new[i] = x[i] + h * (T::a71 * k1[i] + T::a73 * k3[i] + T::a74 * k4[i] +
                               T::a75 * k5[i] + T::a76 * k6[i]);
      k7 = field(x_new);

      double err = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double e = h * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] +
                              T::e6 * k6[i] + T::e7 * k7[i]);
        const double sc =
            cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(x[i]), std::abs(x_new[i]));
        err = std::max(err, std::abs(e) / sc);
      }

      if (err <= 1.0) {
        double factor = detail::kSafety * std::pow(std::max(err, 1e-10), -detail::kAlpha) *
                        std::pow(err_prev_, detail::kBeta);
        factor = std::clamp(factor, detail::kMinFactor, detail::kMaxFactor);
        if (last_rejected_) factor = std::min(factor, 1.0);
        err_prev_ = std::max(err, 1e-4);
        last_rejected_ = false;
        ++accepted_;
        // A clipped step says nothing about the natural step size.
        h_ = clipped ? std::max(h_, h * factor) : h * factor;
        t = clipped ? target : t + h;
        x = project(x_new);
        k1 = field(x);
      } else {
        const double factor = std::max(detail::kMinFactor,
                                       detail::kSafety * std::pow(err, -detail::kAlpha));
        h_ = h * factor;
        last_rejected_ = true;
        ++rejected_;
      }
    }
  }

  static Vec project(const Vec& x) { return detail::project_coordinates<N>(x, kProjectionTol); }

  IntegratorConfig cfg_;
  double h_ = 0.0;
  double err_prev_ = 1e-4;
  bool last_rejected_ = false;
  std::size_t accepted_ = 0;
  std::size_t rejected_ = 0;
};

/// Integrates a model from s0 at t_start to cfg.t_end, sampling every
/// cfg.sample_interval.
template <class Model>
Trajectory<Model> integrate(const typename Model::Params& p, const typename Model::State& s0,
                            const IntegratorConfig& cfg, double t_start = 0.0) {
  constexpr std::size_t N = Model::dim;
  Trajectory<Model> traj;
  traj.regimes.push_back(p);
  const typename Model::State start = project_to_simplex(s0);
  traj.push(t_start, start, 0);
  SimplexIntegrator<N> stepper(cfg);
  auto field = [&p](const std::array<double, N>& x) { return Model::rhs(p, x); };
  stepper.advance(field, Model::to_array(start), t_start, cfg.t_end,
                  [&traj](double t, const std::array<double, N>& x) {
                    traj.push(t, Model::from_array(x), 0);
                  });
  return traj;
}

inline Trajectory3 integrate(const BaselineParams& p, const SimplexState3& s0,
                             const IntegratorConfig& cfg) {
  return integrate<BaselineModel>(p, s0, cfg);
}

inline Trajectory4 integrate(const FourGroupParams& p, const SimplexState4& s0,
                             const IntegratorConfig& cfg) {
  return integrate<FourGroupModel>(p, s0, cfg);
}

inline double max_distance(const SimplexState3& a, const SimplexState3& b) {
  return std::max(std::abs(a.L - b.L), std::abs(a.R - b.R));
}

inline double max_distance(const SimplexState4& a, const SimplexState4& b) {
  return std::max({std::abs(a.L - b.L), std::abs(a.R - b.R), std::abs(a.A - b.A)});
}

/// Earliest sample time from which the trajectory stays within eps (max
/// norm) of target; nullopt when it never settles there.
template <class Model>
std::optional<double> detect_convergence(const Trajectory<Model>& traj,
                                         const typename Model::State& target, double eps) {
  std::optional<double> first;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (max_distance(traj.states[i], target) <= eps) {
      if (!first) first = traj.times[i];
    } else {
      first.reset();
    }
  }
  return first;
}

}  // namespace polarsim
