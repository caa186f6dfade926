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

// Perron-Frobenius and Metzler-matrix thresholds for two radical wings.
//
// Every matrix here is 2x2, so eigenpairs come from the characteristic
// polynomial in closed form. Square roots are arranged so that no positive
// quantity is obtained as a difference of two nearly equal numbers.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "polarsim/error.hpp"
#include "polarsim/model.hpp"

namespace polarsim {

/// Row-major 2x2 matrix.
struct Matrix2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static Matrix2 diagonal(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }
  static Matrix2 identity() { return diagonal(1.0, 1.0); }

  double operator()(int i, int j) const {
    return i == 0 ? (j == 0 ? a11 : a12) : (j == 0 ? a21 : a22);
  }
  double trace() const { return a11 + a22; }
  double det() const { return a11 * a22 - a12 * a21; }

  friend Matrix2 operator+(const Matrix2& x, const Matrix2& y) {
    return {x.a11 + y.a11, x.a12 + y.a12, x.a21 + y.a21, x.a22 + y.a22};
  }
  friend Matrix2 operator-(const Matrix2& x, const Matrix2& y) {
    return {x.a11 - y.a11, x.a12 - y.a12, x.a21 - y.a21, x.a22 - y.a22};
  }
  friend Matrix2 operator*(double s, const Matrix2& x) {
    return {s * x.a11, s * x.a12, s * x.a21, s * x.a22};
  }
  friend Matrix2 operator*(const Matrix2& x, const Matrix2& y) {
    return {x.a11 * y.a11 + x.a12 * y.a21, x.a11 * y.a12 + x.a12 * y.a22,
            x.a21 * y.a11 + x.a22 * y.a21, x.a21 * y.a12 + x.a22 * y.a22};
  }
  friend bool operator==(const Matrix2&, const Matrix2&) = default;
};

using Vector2 = std::array<double, 2>;

inline Vector2 operator*(const Matrix2& m, const Vector2& v) {
  return {m.a11 * v[0] + m.a12 * v[1], m.a21 * v[0] + m.a22 * v[1]};
}

/// Row vector times matrix, q^T M.
inline Vector2 left_multiply(const Vector2& q, const Matrix2& m) {
  return {q[0] * m.a11 + q[1] * m.a21, q[0] * m.a12 + q[1] * m.a22};
}

inline Matrix2 recruitment_matrix(const BaselineParams& p) {
  return {p.alpha_L, p.gamma_RL, p.gamma_LR, p.alpha_R};
}
inline Matrix2 decay_matrix(const BaselineParams& p) { return Matrix2::diagonal(p.mu_L, p.mu_R); }
inline Matrix2 mobilisation_matrix(const FourGroupParams& p) {
  return Matrix2::diagonal(p.delta_L, p.delta_R);
}

/// M^{-1} K for diagonal M.
inline Matrix2 next_generation(const Matrix2& K, const Matrix2& M) {
  if (!(M.a11 > 0.0 && M.a22 > 0.0) || M.a12 != 0.0 || M.a21 != 0.0) {
    throw Error(ErrorCode::OutOfRange, "decay matrix must be positive diagonal");
  }
  return {K.a11 / M.a11, K.a12 / M.a11, K.a21 / M.a22, K.a22 / M.a22};
}

/// Dominant eigenvalue data of a 2x2 matrix with nonnegative off-diagonal
/// entries: the eigenvalue is mid + radius, and the gaps hold lambda - a11 and
/// lambda - a22 computed without cancellation.
struct DominantEigen {
  double value;
  double gap11;  // lambda - a11
  double gap22;  // lambda - a22
};

inline DominantEigen dominant_eigen(const Matrix2& m) {
  if (m.a12 < 0.0 || m.a21 < 0.0) {
    throw Error(ErrorCode::OutOfRange, "off-diagonal entries must be nonnegative");
  }
  const double half_diff = 0.5 * (m.a11 - m.a22);
  const double radius = std::hypot(half_diff, std::sqrt(m.a12 * m.a21));
  const double value = 0.5 * (m.a11 + m.a22) + radius;
  // gap11 = radius - half_diff, gap22 = radius + half_diff; rewrite the one that
  // cancels via gap11 * gap22 = a12 * a21.
  double gap11, gap22;
  if (half_diff >= 0.0) {
    gap22 = radius + half_diff;
    gap11 = gap22 > 0.0 ? m.a12 * m.a21 / gap22 : 0.0;
  } else {
    gap11 = radius - half_diff;
    gap22 = gap11 > 0.0 ? m.a12 * m.a21 / gap11 : 0.0;
  }
  return {value, gap11, gap22};
}

/// Spectral bound s(G) = max Re(eig G) of a Metzler matrix.
inline double spectral_bound(const Matrix2& G) { return dominant_eigen(G).value; }

/// Perron root of a nonnegative 2x2 matrix.
inline double perron_root(const Matrix2& B) {
  if (B.a11 < 0.0 || B.a22 < 0.0) {
    throw Error(ErrorCode::OutOfRange, "matrix must be entrywise nonnegative");
  }
  return dominant_eigen(B).value;
}

struct PerronData {
  double lambda_pf = 0.0;
  Vector2 right{};  // u, with u1 + u2 = 1
  Vector2 left{};   // q, with q1 + q2 = 1
};

namespace detail {

inline Vector2 normalised(double x, double y) {
  const double s = x + y;
  return {x / s, y / s};
}

// Dominant eigenpairs of an irreducible Metzler 2x2 matrix (a12, a21 > 0).
inline PerronData metzler_perron(const Matrix2& m) {
  if (!(m.a12 > 0.0 && m.a21 > 0.0)) {
    throw Error(ErrorCode::OutOfRange, "Perron vectors need strictly positive off-diagonals");
  }
  const DominantEigen e = dominant_eigen(m);
  PerronData out;
  out.lambda_pf = e.value;
  // (m - lambda I) u = 0: u = (a12, gap11) = (gap22, a21), pick the
  // better-conditioned representative.
  out.right = e.gap11 >= e.gap22 ? normalised(m.a12, e.gap11) : normalised(e.gap22, m.a21);
  // q^T (m - lambda I) = 0: q = (a21, gap11) = (gap22, a12).
  out.left = e.gap11 >= e.gap22 ? normalised(m.a21, e.gap11) : normalised(e.gap22, m.a12);
  return out;
}

}  // namespace detail

/// Perron root and positive eigenvectors of M^{-1} K.
inline PerronData pf_root(const Matrix2& K, const Matrix2& M) {
  if (!(K.a11 > 0.0 && K.a12 > 0.0 && K.a21 > 0.0 && K.a22 > 0.0)) {
    throw Error(ErrorCode::OutOfRange, "recruitment matrix must be entrywise positive");
  }
  return detail::metzler_perron(next_generation(K, M));
}

/// Spectral bound and left/right Perron vectors of an irreducible Metzler
/// matrix such as K - M. `lambda_pf` holds s(G).
inline PerronData metzler_perron(const Matrix2& G) { return detail::metzler_perron(G); }

/// Radical reproduction number, lambda_PF(M^{-1} K).
inline double r_rad(const BaselineParams& p) {
  return pf_root(recruitment_matrix(p), decay_matrix(p)).lambda_pf;
}

/// G(Delta) = (1 - Delta) K + Delta D - M, the linearisation at a
/// near-centrist post-shock state.
inline Matrix2 shocked_generator(double delta, const Matrix2& K, const Matrix2& M,
                                 const Matrix2& D) {
  return (1.0 - delta) * K + delta * D - M;
}

/// Phi(Delta) = lambda_PF(M^{-1}((1 - Delta) K + Delta D)).
inline double phi(double delta, const Matrix2& K, const Matrix2& M, const Matrix2& D) {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw Error(ErrorCode::OutOfRange, "shock amplitude must lie in [0,1]");
  }
  return perron_root(next_generation((1.0 - delta) * K + delta * D, M));
}

/// Marker: no feasible state shock reaches the threshold.
struct ShockProof {
  friend bool operator==(ShockProof, ShockProof) { return true; }
};

using Threshold = std::variant<double, ShockProof>;

inline bool is_shock_proof(const Threshold& t) { return std::holds_alternative<ShockProof>(t); }

/// Coefficients and real roots of det G(Delta) = 0, i.e. q2 D^2 + q1 D + q0 = 0.
struct ThresholdQuadratic {
  double q2 = 0.0, q1 = 0.0, q0 = 0.0;
  std::optional<double> perron_branch;  // root where the dominant eigenvalue vanishes
  std::optional<double> other_branch;   // root of the non-Perron eigenvalue, if real
};

inline ThresholdQuadratic threshold_quadratic(const Matrix2& K, const Matrix2& M,
                                              const Matrix2& D) {
  const double aL = K.a11 - M.a11, aR = K.a22 - M.a22;
  const double eL = D.a11 - K.a11, eR = D.a22 - K.a22;
  const double g = K.a12 * K.a21;
  ThresholdQuadratic out;
  out.q2 = eL * eR - g;
  out.q1 = aL * eR + aR * eL + 2.0 * g;
  out.q0 = aL * aR - g;
  const double disc = out.q1 * out.q1 - 4.0 * out.q2 * out.q0;
  if (disc < 0.0) return out;
  const double root_disc = std::sqrt(disc);
  // (-q1 - sqrt(disc)) / (2 q2) written as 2 q0 / (-q1 + sqrt(disc)); the two
  // agree when q2 != 0 and the second reduces to -q0/q1 when q2 == 0.
  const double denom = -out.q1 + root_disc;
  if (denom != 0.0) out.perron_branch = 2.0 * out.q0 / denom;
  if (out.q2 != 0.0) out.other_branch = (-out.q1 + root_disc) / (2.0 * out.q2);
  return out;
}

namespace detail {

// Unique root of Phi - 1 on [0,1] for a convex Phi with Phi(0) < 1 < Phi(1).
inline double bisect_phi(const Matrix2& K, const Matrix2& M, const Matrix2& D) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid, K, M, D) < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Critical state-shock amplitude for asymmetric parameters: the unique
/// Delta in (0,1) with Phi(Delta) = 1, or ShockProof when Phi(1) <= 1.
inline Threshold delta_c_asym(const Matrix2& K, const Matrix2& M, const Matrix2& D) {
  const double phi0 = phi(0.0, K, M, D);
  if (phi0 >= 1.0) {
    throw Error(ErrorCode::BaselineSupercritical,
                "Phi(0) = " + std::to_string(phi0) + " >= 1");
  }
  if (phi(1.0, K, M, D) <= 1.0) return ShockProof{};

  const ThresholdQuadratic quad = threshold_quadratic(K, M, D);
  const double bisected = detail::bisect_phi(K, M, D);
  if (quad.perron_branch) {
    const double root = *quad.perron_branch;
    const bool in_range = root > 0.0 && root < 1.0;
    if (in_range && shocked_generator(root, K, M, D).trace() <= 0.0 &&
        std::abs(phi(root, K, M, D) - 1.0) < 1e-10 && std::abs(root - bisected) < 1e-8) {
      return root;
    }
  }
  // The closed form lost the branch to rounding; the bisection on the convex
  // Phi is always valid.
  return bisected;
}

inline Threshold delta_c_asym(const FourGroupParams& p) {
  return delta_c_asym(recruitment_matrix(p.base), decay_matrix(p.base), mobilisation_matrix(p));
}

/// Symmetric critical amplitude (mu - beta) / (delta - beta).
inline Threshold delta_c_sym(double beta, double mu, double delta) {
  if (beta >= mu) {
    throw Error(ErrorCode::RegimeError, "beta >= mu: baseline is not subcritical");
  }
  if (delta <= beta) {
    throw Error(ErrorCode::FormulaInapplicable, "delta <= beta");
  }
  const double value = (mu - beta) / (delta - beta);
  if (value >= 1.0) return ShockProof{};
  return value;
}

}  // namespace polarsim
