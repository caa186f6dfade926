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
#include <string_view>

#include "polarsim/error.hpp"

namespace polarsim {

/// Default tolerance for floating-point drift outside the simplex.
inline constexpr double kProjectionTol = 1e-9;

/// Rates of the three-group model. Field order follows the raw vector
/// accepted by validate_baseline: (alpha_L, alpha_R, mu_L, mu_R, gamma_RL, gamma_LR).
struct BaselineParams {
  double alpha_L = 0.0;   // recruitment, centrist -> left
  double alpha_R = 0.0;   // recruitment, centrist -> right
  double mu_L = 0.0;      // deradicalisation, left -> centre
  double mu_R = 0.0;      // deradicalisation, right -> centre
  double gamma_RL = 0.0;  // reactive polarisation: right presence recruits left
  double gamma_LR = 0.0;  // reactive polarisation: left presence recruits right

  static constexpr std::array<std::string_view, 6> kNames = {
      "alpha_L", "alpha_R", "mu_L", "mu_R", "gamma_RL", "gamma_LR"};

  std::array<double, 6> as_array() const {
    return {alpha_L, alpha_R, mu_L, mu_R, gamma_RL, gamma_LR};
  }

  BaselineParams validated() const;

  bool is_symmetric() const {
    return alpha_L == alpha_R && mu_L == mu_R && gamma_RL == gamma_LR;
  }

  friend bool operator==(const BaselineParams&, const BaselineParams&) = default;
};

namespace detail {
inline void require_positive(double value, std::string_view name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(ErrorCode::NonPositiveParameter,
                std::string(name) + " = " + std::to_string(value));
  }
}
}  // namespace detail

inline BaselineParams validate_baseline(const std::array<double, 6>& raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    detail::require_positive(raw[i], BaselineParams::kNames[i]);
  }
  return {raw[0], raw[1], raw[2], raw[3], raw[4], raw[5]};
}

inline BaselineParams BaselineParams::validated() const { return validate_baseline(as_array()); }

struct FourGroupParams {
  BaselineParams base;
  double delta_L = 0.0;  // mobilisation of the disengaged by the left
  double delta_R = 0.0;  // mobilisation of the disengaged by the right
  double rho = 0.0;      // re-engagement, disengaged -> centre

  bool is_symmetric() const { return base.is_symmetric() && delta_L == delta_R; }

  friend bool operator==(const FourGroupParams&, const FourGroupParams&) = default;
};

inline FourGroupParams validate_four_group(const FourGroupParams& p) {
  p.base.validated();
  detail::require_positive(p.delta_L, "delta_L");
  detail::require_positive(p.delta_R, "delta_R");
  detail::require_positive(p.rho, "rho");
  return p;
}

/// Symmetric parameterisation: alpha_L = alpha_R, mu_L = mu_R, gamma_RL = gamma_LR
/// (and delta_L = delta_R for the four-group model). Only beta = alpha + gamma
/// enters the dynamics on the diagonal L = R.
struct SymmetricParams {
  double alpha = 0.0;
  double gamma = 0.0;
  double mu = 0.0;
  std::optional<double> delta;
  std::optional<double> rho;

  double beta() const { return alpha + gamma; }

  SymmetricParams validated() const {
    detail::require_positive(alpha, "alpha");
    detail::require_positive(gamma, "gamma");
    detail::require_positive(mu, "mu");
    if (delta) detail::require_positive(*delta, "delta");
    if (rho) detail::require_positive(*rho, "rho");
    return *this;
  }

  BaselineParams to_baseline() const {
    return validate_baseline(std::array<double, 6>{alpha, alpha, mu, mu, gamma, gamma});
  }

  FourGroupParams to_four_group() const {
    if (!delta || !rho) {
      throw Error(ErrorCode::NonPositiveParameter,
                  "symmetric four-group parameters need delta and rho");
    }
    return validate_four_group({to_baseline(), *delta, *delta, *rho});
  }
};

/// Point of the 2-simplex; the centrist share is always derived.
struct SimplexState3 {
  double L = 0.0;
  double R = 0.0;

  double C() const { return 1.0 - L - R; }

  friend bool operator==(const SimplexState3&, const SimplexState3&) = default;
};

/// Point of the 3-simplex; the centrist share is always derived.
struct SimplexState4 {
  double L = 0.0;
  double R = 0.0;
  double A = 0.0;

  double C() const { return 1.0 - L - R - A; }

  friend bool operator==(const SimplexState4&, const SimplexState4&) = default;
};

namespace detail {

// Clamps coordinates into [0,1] and their sum to <= 1. The second pass is a no-op,
// so the projection is idempotent bit for bit.
template <std::size_t N>
std::array<double, N> project_coordinates(std::array<double, N> x, double tol) {
  double total = 0.0;
  for (double v : x) {
    if (!std::isfinite(v) || v < -tol) {
      throw Error(ErrorCode::SimplexViolation,
                  "coordinate " + std::to_string(v) + " below -" + std::to_string(tol));
    }
    total += v;
  }
  if (total > 1.0 + tol) {
    throw Error(ErrorCode::SimplexViolation,
                "coordinate sum " + std::to_string(total) + " exceeds 1");
  }
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
  auto sum = [&x] {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  };
  double excess = sum() - 1.0;
  if (excess > 0.0) {
    auto largest = std::max_element(x.begin(), x.end());
    *largest = std::max(0.0, *largest - excess);
    while (sum() > 1.0) *largest = std::nextafter(*largest, 0.0);
  }
  return x;
}

}  // namespace detail

inline SimplexState3 project_to_simplex(const SimplexState3& s, double tol = kProjectionTol) {
  auto x = detail::project_coordinates<2>({s.L, s.R}, tol);
  return {x[0], x[1]};
}

inline SimplexState4 project_to_simplex(const SimplexState4& s, double tol = kProjectionTol) {
  auto x = detail::project_coordinates<3>({s.L, s.R, s.A}, tol);
  return {x[0], x[1], x[2]};
}

/// A crisis at `time`: move the fraction `delta` of centrists into
/// disengagement, then change parameters. The structural part is either an
/// additive shift `dbeta` of the reactive-polarisation rates (symmetric
/// channel) or a full replacement parameter set (asymmetric channel).
struct ShockEvent {
  double time = 0.0;
  double delta = 0.0;
  double dbeta = 0.0;
  std::optional<FourGroupParams> replacement;
  std::optional<double> raw_s;  // when set, delta == 1 - exp(-raw_s)

  static ShockEvent from_raw_amplitude(double time, double s, double dbeta = 0.0) {
    ShockEvent e;
    e.time = time;
    e.raw_s = s;
    e.delta = -std::expm1(-s);
    e.dbeta = dbeta;
    return e.validated();
  }

  ShockEvent validated() const {
    if (!(delta >= 0.0 && delta < 1.0)) {
      throw Error(ErrorCode::OutOfRange, "shock amplitude must lie in [0,1)");
    }
    if (!(dbeta >= 0.0)) {
      throw Error(ErrorCode::OutOfRange, "structural shift dbeta must be >= 0");
    }
    if (raw_s && !(std::abs(delta + std::expm1(-*raw_s)) < 1e-12)) {
      throw Error(ErrorCode::OutOfRange, "delta inconsistent with raw amplitude");
    }
    if (replacement) validate_four_group(*replacement);
    return *this;
  }
};

/// One election expressed as fractions of the eligible electorate.
struct ElectorateRow {
  std::string year;
  double V = 0.0;  // radical share, L + R
  double C = 0.0;  // mainstream and residual parties
  double A = 0.0;  // non-voters

  double total() const { return V + C + A; }
};

/// Tolerance for comparing against three-decimal published rows.
inline constexpr double kElectorateRowTol = 5e-4;

inline ElectorateRow proxy_decompose(double radical_vote_share, double turnout,
                                     std::string year = {}) {
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::OutOfRange, std::string(name) + " = " + std::to_string(v));
    }
  };
  check(radical_vote_share, "radical_vote_share");
  check(turnout, "turnout");
  ElectorateRow row;
  row.year = std::move(year);
  row.V = radical_vote_share * turnout;
  row.A = 1.0 - turnout;
  row.C = 1.0 - row.V - row.A;
  return row;
}

}  // namespace polarsim
