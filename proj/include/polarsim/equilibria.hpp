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
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "polarsim/dynamics.hpp"
#include "polarsim/model.hpp"
#include "polarsim/spectral.hpp"

namespace polarsim {

/// Eigenvalues whose real part is within this band of zero are reported as
/// nonhyperbolic instead of being classified.
inline constexpr double kHyperbolicBand = 1e-12;

enum class Stability {
  StableNode,
  StableStar,
  StableFocus,
  Saddle,
  UnstableNode,
  UnstableFocus,
  Nonhyperbolic,
};

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::StableNode: return "stable_node";
    case Stability::StableStar: return "stable_star";
    case Stability::StableFocus: return "stable_focus";
    case Stability::Saddle: return "saddle";
    case Stability::UnstableNode: return "unstable_node";
    case Stability::UnstableFocus: return "unstable_focus";
    case Stability::Nonhyperbolic: return "nonhyperbolic";
  }
  return "unknown";
}

inline bool is_stable(Stability s) {
  return s == Stability::StableNode || s == Stability::StableStar || s == Stability::StableFocus;
}

using Eigenvalues = std::vector<std::complex<double>>;

inline Eigenvalues eigenvalues(const Matrix2& J) {
  const double half_tr = 0.5 * J.trace();
  const double disc = half_tr * half_tr - J.det();
  if (disc >= 0.0) {
    const double r = std::sqrt(disc);
    // Larger-magnitude root first, the other from the product to avoid cancellation.
    const double big = half_tr >= 0.0 ? half_tr + r : half_tr - r;
    const double small = big != 0.0 ? J.det() / big : 0.0;
    return {std::max(big, small), std::min(big, small)};
  }
  const double im = std::sqrt(-disc);
  return {{half_tr, im}, {half_tr, -im}};
}

namespace detail {

inline Matrix2 top_left(const Matrix3& J) { return {J[0][0], J[0][1], J[1][0], J[1][1]}; }

// Roots of x^3 + a x^2 + b x + c, polished by Newton steps.
inline Eigenvalues cubic_roots(double a, double b, double c) {
  using cd = std::complex<double>;
  const double q = (3.0 * b - a * a) / 9.0;
  const double r = (9.0 * a * b - 27.0 * c - 2.0 * a * a * a) / 54.0;
  const cd disc = cd(q * q * q + r * r, 0.0);
  const cd s = std::pow(cd(r) + std::sqrt(disc), 1.0 / 3.0);
  const cd t = std::abs(s) > 0.0 ? cd(-q) / s : cd(0.0);
  const cd w(-0.5, std::sqrt(3.0) / 2.0);
  Eigenvalues roots = {s + t - a / 3.0, w * s + std::conj(w) * t - a / 3.0,
                       std::conj(w) * s + w * t - a / 3.0};
  for (cd& z : roots) {
    for (int it = 0; it < 3; ++it) {
      const cd f = ((z + a) * z + b) * z + c;
      const cd df = (3.0 * z + 2.0 * a) * z + b;
      if (std::abs(df) == 0.0) break;
      z -= f / df;
    }
    if (std::abs(z.imag()) < 1e-14 * std::max(1.0, std::abs(z.real()))) z = z.real();
  }
  return roots;
}

}  // namespace detail

/// Eigenvalues of a 3x3 Jacobian; block-triangular matrices (as at every
/// four-group equilibrium) are split exactly.
inline Eigenvalues eigenvalues(const Matrix3& J) {
  if ((J[2][0] == 0.0 && J[2][1] == 0.0) || (J[0][2] == 0.0 && J[1][2] == 0.0)) {
    Eigenvalues ev = eigenvalues(detail::top_left(J));
    ev.emplace_back(J[2][2]);
    return ev;
  }
  const double tr = J[0][0] + J[1][1] + J[2][2];
  const double minors = (J[0][0] * J[1][1] - J[0][1] * J[1][0]) +
                        (J[0][0] * J[2][2] - J[0][2] * J[2][0]) +
                        (J[1][1] * J[2][2] - J[1][2] * J[2][1]);
  const double det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                     J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                     J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
  return detail::cubic_roots(-tr, minors, -det);
}

namespace detail {

inline Stability classify_from_eigenvalues(const Eigenvalues& ev) {
  bool any_complex = false;
  int negative = 0, positive = 0;
  for (const auto& z : ev) {
    if (std::abs(z.real()) <= kHyperbolicBand) return Stability::Nonhyperbolic;
    (z.real() < 0.0 ? negative : positive) += 1;
    any_complex = any_complex || z.imag() != 0.0;
  }
  if (positive == 0) return any_complex ? Stability::StableFocus : Stability::StableNode;
  if (negative == 0) return any_complex ? Stability::UnstableFocus : Stability::UnstableNode;
  return Stability::Saddle;
}

}  // namespace detail

/// Trace/determinant classification of a planar linearisation. A repeated
/// eigenvalue (discriminant within kHyperbolicBand) with vanishing
/// off-diagonal entries is a star.
inline Stability classify(const Matrix2& J) {
  const Eigenvalues ev = eigenvalues(J);
  for (const auto& z : ev) {
    if (std::abs(z.real()) <= kHyperbolicBand) return Stability::Nonhyperbolic;
  }
  const double disc = J.trace() * J.trace() - 4.0 * J.det();
  if (std::abs(disc) <= kHyperbolicBand) {
    if (J.trace() > 0.0) return Stability::UnstableNode;
    const bool scalar =
        std::abs(J.a12) <= kHyperbolicBand && std::abs(J.a21) <= kHyperbolicBand;
    return scalar ? Stability::StableStar : Stability::StableNode;
  }
  if (disc < 0.0) return J.trace() < 0.0 ? Stability::StableFocus : Stability::UnstableFocus;
  return detail::classify_from_eigenvalues(ev);
}

inline Stability classify(const Matrix3& J) {
  return detail::classify_from_eigenvalues(eigenvalues(J));
}

// ---------------------------------------------------------------------------
// Equilibria
// ---------------------------------------------------------------------------

struct SymmetricEquilibrium {
  double P;  // each radical wing
  double C;  // centrist share, mu / beta
};

/// Interior equilibrium of the symmetric model, nullopt when only the
/// centrist state exists (beta <= mu).
inline std::optional<SymmetricEquilibrium> symmetric_equilibrium(double beta, double mu) {
  if (!(beta > 0.0 && mu > 0.0)) {
    throw Error(ErrorCode::NonPositiveParameter, "beta and mu must be positive");
  }
  if (beta <= mu) return std::nullopt;
  return SymmetricEquilibrium{0.5 * (1.0 - mu / beta), mu / beta};
}

struct InteriorEquilibrium {
  double L, R, C;
  SimplexState3 state() const { return {L, R}; }
};

/// Unique interior equilibrium C* = 1/lambda_PF, (L*, R*) along the Perron
/// vector of M^{-1} K; nullopt when lambda_PF <= 1.
inline std::optional<InteriorEquilibrium> interior_equilibrium(const BaselineParams& p) {
  const PerronData pd = pf_root(recruitment_matrix(p), decay_matrix(p));
  if (pd.lambda_pf <= 1.0) return std::nullopt;
  const double C = 1.0 / pd.lambda_pf;
  const double radical = 1.0 - C;
  return InteriorEquilibrium{radical * pd.right[0], radical * pd.right[1], C};
}

enum class E0Stability { Stable, Nonhyperbolic, Unstable };

inline const char* to_string(E0Stability s) {
  switch (s) {
    case E0Stability::Stable: return "stable";
    case E0Stability::Nonhyperbolic: return "nonhyperbolic";
    case E0Stability::Unstable: return "unstable";
  }
  return "unknown";
}

/// Local stability of the centrist state from the trace and determinant of
/// K - M: stable iff alpha_L + alpha_R < mu_L + mu_R and
/// (alpha_L - mu_L)(alpha_R - mu_R) > gamma_RL gamma_LR.
inline E0Stability e0_stability(const BaselineParams& p) {
  const double det = (p.alpha_L - p.mu_L) * (p.alpha_R - p.mu_R) - p.gamma_RL * p.gamma_LR;
  const bool trace_negative = p.alpha_L + p.alpha_R < p.mu_L + p.mu_R;
  if (std::abs(det) <= kHyperbolicBand) return E0Stability::Nonhyperbolic;
  return (trace_negative && det > 0.0) ? E0Stability::Stable : E0Stability::Unstable;
}

enum class EquilibriumKind { Centrist, Interior };

inline const char* to_string(EquilibriumKind k) {
  return k == EquilibriumKind::Centrist ? "E0" : "E1";
}

template <class State>
struct EquilibriumReport {
  EquilibriumKind kind = EquilibriumKind::Centrist;
  State location{};
  bool exists = false;
  std::string reason;
  Stability classification = Stability::Nonhyperbolic;
  Eigenvalues eigenvalues;
};

using EquilibriumReport3 = EquilibriumReport<SimplexState3>;
using EquilibriumReport4 = EquilibriumReport<SimplexState4>;

/// Both candidate equilibria of the three-group model with their
/// linearisations.
inline std::vector<EquilibriumReport3> equilibrium_reports(const BaselineParams& p) {
  std::vector<EquilibriumReport3> out;
  EquilibriumReport3 e0;
  e0.kind = EquilibriumKind::Centrist;
  e0.exists = true;
  e0.reason = "always an equilibrium";
  const Matrix2 J0 = jacobian_baseline(p, {0.0, 0.0});
  e0.eigenvalues = eigenvalues(J0);
  e0.classification = classify(J0);
  out.push_back(e0);

  EquilibriumReport3 e1;
  e1.kind = EquilibriumKind::Interior;
  const double lambda = r_rad(p);
  if (auto eq = interior_equilibrium(p)) {
    e1.exists = true;
    e1.reason = "lambda_PF = " + std::to_string(lambda) + " > 1";
    e1.location = eq->state();
    const Matrix2 J1 = jacobian_baseline(p, e1.location);
    e1.eigenvalues = eigenvalues(J1);
    e1.classification = classify(J1);
  } else {
    e1.reason = "lambda_PF = " + std::to_string(lambda) + " <= 1";
  }
  out.push_back(e1);
  return out;
}

/// Four-group equilibria: the baseline equilibria on the face A = 0 with the
/// extra transverse eigenvalue -(delta_L L* + delta_R R* + rho).
inline std::vector<EquilibriumReport4> equilibrium_reports(const FourGroupParams& p) {
  std::vector<EquilibriumReport4> out;
  for (const EquilibriumReport3& r : equilibrium_reports(p.base)) {
    EquilibriumReport4 e;
    e.kind = r.kind;
    e.exists = r.exists;
    e.reason = r.reason;
    if (r.exists) {
      e.location = {r.location.L, r.location.R, 0.0};
      const Matrix3 J = jacobian_4group(p, e.location);
      e.eigenvalues = eigenvalues(J);
      e.classification = classify(J);
    }
    out.push_back(e);
  }
  return out;
}

/// Non-degeneracy data of the scalar field f(P, beta) = P[beta(1 - 2P) - mu]
/// at the bifurcation point (P, beta) = (0, mu).
struct TranscriticalCertificate {
  double f, f_P, f_PP, f_Pbeta;
};

inline TranscriticalCertificate transcritical_certificate(double mu) {
  if (!(mu > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "mu must be positive");
  const double P = 0.0, beta = mu;
  return {P * (beta * (1.0 - 2.0 * P) - mu), beta * (1.0 - 4.0 * P) - mu, -4.0 * beta,
          1.0 - 4.0 * P};
}

}  // namespace polarsim
