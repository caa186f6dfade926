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
#include <limits>
#include <string>
#include <vector>

#include "polarsim/dynamics.hpp"
#include "polarsim/model.hpp"
#include "polarsim/spectral.hpp"

namespace polarsim {

/// Minimum distance from the boundary at which the Dulac expression is
/// evaluated.
inline constexpr double kInteriorMargin = 1e-6;

/// Allowed increase of a Lyapunov function between consecutive samples.
inline constexpr double kMonotoneSlack = 1e-9;

/// Allowed relative excess over the exponential bound on A.
inline constexpr double kDecaySlack = 1e-9;

/// Round-off allowance on the inward normal component at boundary points.
inline constexpr double kInflowSlack = 1e-14;

/// Allowed drift outside the simplex along a stored trajectory.
inline constexpr double kInvarianceTol = 1e-9;

/// Outcome of one sampled check. `worst` is the extreme value of the checked
/// quantity; `witness` holds the coordinates where it occurred when the check
/// fails.
struct DiagnosticReport {
  std::string name;
  std::size_t samples = 0;
  double worst = 0.0;
  bool pass = true;
  std::vector<double> witness;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Dulac
// ---------------------------------------------------------------------------

namespace detail {

inline void require_interior(const SimplexState3& s) {
  if (s.L < kInteriorMargin || s.R < kInteriorMargin || s.C() < kInteriorMargin) {
    throw Error(ErrorCode::BoundaryPoint, "point within 1e-6 of the simplex boundary");
  }
}

}  // namespace detail

/// div(B F) with B = 1/(L R C):
/// -gamma_RL/L^2 - gamma_LR/R^2 - mu_L/(R C^2) - mu_R/(L C^2).
inline double dulac_divergence(const BaselineParams& p, const SimplexState3& s) {
  detail::require_interior(s);
  const double L = s.L, R = s.R, C = s.C();
  return -p.gamma_RL / (L * L) - p.gamma_LR / (R * R) - p.mu_L / (R * C * C) -
         p.mu_R / (L * C * C);
}

/// Central-difference divergence of B F for an arbitrary planar field
/// `field(SimplexState3) -> Vector2`.
template <class Field>
double numeric_dulac_divergence(Field&& field, const SimplexState3& s, double h = 1e-7) {
  detail::require_interior(s);
  auto BF = [&field](double L, double R) {
    const Vector2 f = field(SimplexState3{L, R});
    const double B = 1.0 / (L * R * (1.0 - L - R));
    return Vector2{B * f[0], B * f[1]};
  };
  const double hL = std::min(h, 0.5 * s.L), hR = std::min(h, 0.5 * s.R);
  const double dL = (BF(s.L + hL, s.R)[0] - BF(s.L - hL, s.R)[0]) / (2.0 * hL);
  const double dR = (BF(s.L, s.R + hR)[1] - BF(s.L, s.R - hR)[1]) / (2.0 * hR);
  return dL + dR;
}

/// Evaluates `divergence(point)` at every point; passes iff all values are
/// strictly negative.
template <class Divergence>
DiagnosticReport dulac_audit(Divergence&& divergence, const std::vector<SimplexState3>& points,
                             std::string name = "dulac") {
  DiagnosticReport r;
  r.name = std::move(name);
  r.worst = -std::numeric_limits<double>::infinity();
  for (const SimplexState3& s : points) {
    const double d = divergence(s);
    ++r.samples;
    if (d > r.worst || std::isnan(d)) {
      r.worst = d;
      if (!(d < 0.0)) {
        r.pass = false;
        r.witness = {s.L, s.R, s.C()};
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Lyapunov functions
// ---------------------------------------------------------------------------

enum class LyapunovKind { SubcriticalBaseline, Subcritical4Group, Symmetric4Group };

inline const char* to_string(LyapunovKind k) {
  switch (k) {
    case LyapunovKind::SubcriticalBaseline: return "subcritical-baseline";
    case LyapunovKind::Subcritical4Group: return "subcritical-4group";
    case LyapunovKind::Symmetric4Group: return "symmetric-4group";
  }
  return "unknown";
}

/// Weight on A in W = q^T x + eta A:
/// max{0, (q^T (D - K))_1 / delta_L, (q^T (D - K))_2 / delta_R} + 1e-6.
inline double lyapunov_eta(const FourGroupParams& p, const Vector2& q) {
  const Vector2 w = left_multiply(q, mobilisation_matrix(p) - recruitment_matrix(p.base));
  return std::max({0.0, w[0] / p.delta_L, w[1] / p.delta_R}) + 1e-6;
}

namespace detail {

template <class Traj, class Params, class Fn>
DiagnosticReport monotone_trace(const Traj& traj, const Params& p, std::string name, Fn&& V) {
  for (const Params& regime : traj.regimes) {
    if (!(regime == p)) {
      throw Error(ErrorCode::RegimeMismatch, "trajectory was generated by other parameters");
    }
  }
  DiagnosticReport r;
  r.name = std::move(name);
  r.worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (!(traj.times[i] > traj.times[i - 1])) continue;  // pre/post shock pair
    const double increase = V(traj.states[i]) - V(traj.states[i - 1]);
    ++r.samples;
    if (increase > r.worst) {
      r.worst = increase;
      if (increase > kMonotoneSlack) {
        r.pass = false;
        r.witness = {traj.times[i]};
      }
    }
  }
  if (r.samples == 0) r.worst = 0.0;
  return r;
}

}  // namespace detail

/// V = q^T (L, R) with q the left Perron vector of K - M; needs lambda_PF <= 1.
inline DiagnosticReport lyapunov_trace(LyapunovKind kind, const BaselineParams& p,
                                       const Trajectory3& traj) {
  if (kind != LyapunovKind::SubcriticalBaseline) {
    throw Error(ErrorCode::RegimeMismatch, "three-group trajectories take the baseline function");
  }
  if (r_rad(p) > 1.0) throw Error(ErrorCode::RegimeMismatch, "lambda_PF > 1");
  const Vector2 q = metzler_perron(recruitment_matrix(p) - decay_matrix(p)).left;
  return detail::monotone_trace(traj, p, to_string(kind), [q](const SimplexState3& s) {
    return q[0] * s.L + q[1] * s.R;
  });
}

/// W = q^T (L, R) + eta A for a subcritical baseline, or V = L + R + A for
/// symmetric parameters with beta <= mu.
inline DiagnosticReport lyapunov_trace(LyapunovKind kind, const FourGroupParams& p,
                                       const Trajectory4& traj) {
  switch (kind) {
    case LyapunovKind::Subcritical4Group: {
      const PerronData pd = metzler_perron(recruitment_matrix(p.base) - decay_matrix(p.base));
      if (pd.lambda_pf > 0.0) throw Error(ErrorCode::RegimeMismatch, "s(K - M) > 0");
      const Vector2 q = pd.left;
      const double eta = lyapunov_eta(p, q);
      return detail::monotone_trace(traj, p, to_string(kind), [q, eta](const SimplexState4& s) {
        return q[0] * s.L + q[1] * s.R + eta * s.A;
      });
    }
    case LyapunovKind::Symmetric4Group: {
      if (!p.is_symmetric()) throw Error(ErrorCode::RegimeMismatch, "parameters not symmetric");
      if (p.base.alpha_L + p.base.gamma_RL > p.base.mu_L) {
        throw Error(ErrorCode::RegimeMismatch, "beta > mu");
      }
      return detail::monotone_trace(traj, p, to_string(kind), [](const SimplexState4& s) {
        return s.L + s.R + s.A;
      });
    }
    case LyapunovKind::SubcriticalBaseline:
      break;
  }
  throw Error(ErrorCode::RegimeMismatch, "four-group trajectories need a four-group function");
}

// ---------------------------------------------------------------------------
// Boundary behaviour and invariance
// ---------------------------------------------------------------------------

namespace detail {

inline void record_min(DiagnosticReport& r, double value, std::vector<double> point) {
  ++r.samples;
  if (value < r.worst) {
    r.worst = value;
    if (value < -kInflowSlack) {
      r.pass = false;
      r.witness = std::move(point);
    }
  }
}

}  // namespace detail

/// Inward normal component of `field(SimplexState3) -> Vector2` on the faces
/// L = 0, R = 0 and C = 0, n_samples points per face. Passes iff it is never
/// below -kInflowSlack.
template <class Field>
DiagnosticReport boundary_inflow_check_field(Field&& field, std::size_t n_samples) {
  DiagnosticReport r;
  r.name = "boundary_inflow_baseline";
  r.worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= n_samples; ++i) {
    const double u = n_samples == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(n_samples);
    detail::record_min(r, field(SimplexState3{0.0, u})[0], {0.0, u});
    detail::record_min(r, field(SimplexState3{u, 0.0})[1], {u, 0.0});
    const Vector2 f = field(SimplexState3{u, 1.0 - u});
    detail::record_min(r, -(f[0] + f[1]), {u, 1.0 - u});
  }
  return r;
}

/// Four-group analogue on the faces L = 0, R = 0, A = 0 and C = 0, sampled on
/// an n_samples grid per face.
template <class Field>
DiagnosticReport boundary_inflow_check_field4(Field&& field, std::size_t n_samples) {
  DiagnosticReport r;
  r.name = "boundary_inflow_4group";
  r.worst = std::numeric_limits<double>::infinity();
  const std::size_t n = std::max<std::size_t>(n_samples, 1);
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; i + j <= n; ++j) {
      const double a = static_cast<double>(i) / static_cast<double>(n);
      const double b = static_cast<double>(j) / static_cast<double>(n);
      const double c = std::max(0.0, 1.0 - a - b);
      detail::record_min(r, field(SimplexState4{0.0, a, b})[0], {0.0, a, b});
      detail::record_min(r, field(SimplexState4{a, 0.0, b})[1], {a, 0.0, b});
      detail::record_min(r, field(SimplexState4{a, b, 0.0})[2], {a, b, 0.0});
      const Vector3 f = field(SimplexState4{a, b, c});
      detail::record_min(r, -(f[0] + f[1] + f[2]), {a, b, c});
    }
  }
  return r;
}

inline DiagnosticReport boundary_inflow_check(const BaselineParams& p, std::size_t n_samples) {
  return boundary_inflow_check_field(
      [&p](const SimplexState3& s) { return rhs_baseline(p, s); }, n_samples);
}

inline DiagnosticReport boundary_inflow_check(const FourGroupParams& p, std::size_t n_samples) {
  return boundary_inflow_check_field4([&p](const SimplexState4& s) { return rhs_4group(p, s); },
                                      n_samples);
}

namespace detail {

inline std::vector<double> coords(const SimplexState3& s) { return {s.L, s.R}; }
inline std::vector<double> coords(const SimplexState4& s) { return {s.L, s.R, s.A}; }

}  // namespace detail

/// Largest excursion outside the simplex (negative coordinate or sum above
/// one) along a trajectory; passes iff it stays within kInvarianceTol.
template <class Model>
DiagnosticReport invariance_check(const Trajectory<Model>& traj) {
  DiagnosticReport r;
  r.name = "forward_invariance";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const std::vector<double> x = detail::coords(traj.states[i]);
    double excursion = -traj.states[i].C();
    for (double v : x) excursion = std::max(excursion, -v);
    ++r.samples;
    if (excursion > r.worst) {
      r.worst = excursion;
      if (excursion > kInvarianceTol) {
        r.pass = false;
        r.witness = x;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Disengagement decay
// ---------------------------------------------------------------------------

/// A(t_i) <= A(t_0) exp(-rho (t_i - t_0)) (1 + 1e-9), with t_0 reset at every
/// shock. `worst` is the largest relative excess A / bound - 1.
inline DiagnosticReport a_decay_check(const FourGroupParams& p, const Trajectory4& traj) {
  DiagnosticReport r;
  r.name = "a_decay";
  r.worst = -std::numeric_limits<double>::infinity();
  double t0 = 0.0, A0 = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const bool anchor = i == 0 || !(traj.times[i] > traj.times[i - 1]);
    if (anchor) {
      t0 = traj.times[i];
      A0 = traj.states[i].A;
      continue;
    }
    const double A = traj.states[i].A;
    const double bound = A0 * std::exp(-p.rho * (traj.times[i] - t0));
    double excess;
    if (bound > 0.0) {
      excess = A / bound - 1.0;
    } else {
      excess = A > 0.0 ? std::numeric_limits<double>::infinity() : -1.0;
    }
    ++r.samples;
    if (excess > r.worst) {
      r.worst = excess;
      if (excess > kDecaySlack) {
        r.pass = false;
        r.witness = {traj.times[i], A, bound};
      }
    }
  }
  if (r.samples == 0) r.worst = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Jacobians
// ---------------------------------------------------------------------------

/// Largest entrywise difference between the analytic Jacobian and central
/// differences, relative to max(1, |J|_max).
inline double jacobian_fd_error(const BaselineParams& p, const SimplexState3& s, double h = 1e-6) {
  const Matrix2 J = jacobian_baseline(p, s);
  const double a[2][2] = {{J.a11, J.a12}, {J.a21, J.a22}};
  double err = 0.0, scale = 1.0;
  for (int j = 0; j < 2; ++j) {
    SimplexState3 up = s, dn = s;
    (j == 0 ? up.L : up.R) += h;
    (j == 0 ? dn.L : dn.R) -= h;
    const Vector2 fu = rhs_baseline(p, up), fd = rhs_baseline(p, dn);
    for (int i = 0; i < 2; ++i) {
      err = std::max(err, std::abs((fu[i] - fd[i]) / (2.0 * h) - a[i][j]));
      scale = std::max(scale, std::abs(a[i][j]));
    }
  }
  return err / scale;
}

inline double jacobian_fd_error(const FourGroupParams& p, const SimplexState4& s, double h = 1e-6) {
  const Matrix3 J = jacobian_4group(p, s);
  double err = 0.0, scale = 1.0;
  for (int j = 0; j < 3; ++j) {
    SimplexState4 up = s, dn = s;
    double* u[3] = {&up.L, &up.R, &up.A};
    double* d[3] = {&dn.L, &dn.R, &dn.A};
    *u[j] += h;
    *d[j] -= h;
    const Vector3 fu = rhs_4group(p, up), fd = rhs_4group(p, dn);
    for (int i = 0; i < 3; ++i) {
      err = std::max(err, std::abs((fu[i] - fd[i]) / (2.0 * h) - J[i][j]));
      scale = std::max(scale, std::abs(J[i][j]));
    }
  }
  return err / scale;
}

}  // namespace polarsim
