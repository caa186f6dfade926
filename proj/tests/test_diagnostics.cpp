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
#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "polarsim/diagnostics.hpp"
#include "polarsim/random.hpp"
#include "polarsim/shocks.hpp"
#include "polarsim/verification.hpp"

using namespace polarsim;
using namespace polarsim::testing;

namespace {

IntegratorConfig horizon(double t_end, double sample = 0.25) {
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  cfg.sample_interval = sample;
  return cfg;
}

// Divergence of (F / (L R C)) from central differences of the term-by-term field.
double fd_divergence(const BaselineParams& p, double L, double R, double h = 1e-6) {
  auto g = [&](double l, double r, int i) { return field3(p, l, r)[i] / (l * r * (1.0 - l - r)); };
  return (g(L + h, R, 0) - g(L - h, R, 0)) / (2.0 * h) + (g(L, R + h, 1) - g(L, R - h, 1)) / (2.0 * h);
}

}  // namespace

TEST(Dulac, CentroidMatchesDifferenceOracle) {
  const double third = 1.0 / 3.0;
  const BaselineParams p = SymmetricParams{0.2, 0.3, 0.3}.to_baseline();
  const double value = dulac_divergence(p, {third, third});
  EXPECT_NEAR(value, -2.0 * 9.0 * 0.3 - 2.0 * 27.0 * 0.3, 1e-12);
  EXPECT_NEAR(value, fd_divergence(p, third, third), 1e-6 * std::abs(value));
}

TEST(Dulac, AgreesWithDifferenceOracleAtRandomPoints) {
  Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    const BaselineParams p = random_baseline(rng);
    const SimplexState3 s = random_state3(rng, 0.05);
    const double value = dulac_divergence(p, s);
    ASSERT_LT(value, 0.0);
    ASSERT_NEAR(value, fd_divergence(p, s.L, s.R), 1e-6 * std::abs(value)) << "point " << i;
    ASSERT_NEAR(value, numeric_dulac_divergence([&](const SimplexState3& x) { return rhs_baseline(p, x); }, s),
                1e-5 * std::abs(value));
  }
}

TEST(Dulac, BlowsUpNearBoundary) {
  const BaselineParams p = asym_left();
  EXPECT_GT(std::abs(dulac_divergence(p, {1e-6, 0.3})), 1e12 * p.gamma_RL);
  try {
    dulac_divergence(p, {1e-7, 0.3});
    FAIL() << "expected BoundaryPoint";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoundaryPoint);
  }
}

TEST(Dulac, AuditNegativeOverRandomDraws) {
  Rng rng(32);
  for (int draw = 0; draw < 20; ++draw) {
    const BaselineParams p = random_baseline(rng);
    std::vector<SimplexState3> pts(10000);
    for (auto& s : pts) s = random_state3(rng, kInteriorMargin);
    const DiagnosticReport r = dulac_audit([&](const SimplexState3& s) { return dulac_divergence(p, s); }, pts);
    EXPECT_TRUE(r.pass);
    EXPECT_EQ(r.samples, 10000u);
    EXPECT_LT(r.worst, 0.0);
  }
}

TEST(Lyapunov, SubcriticalBaselineMonotone) {
  Rng rng(33);
  int checked = 0;
  while (checked < 30) {
    const BaselineParams p = random_baseline(rng);
    if (r_rad(p) > 1.0) continue;
    const Trajectory3 traj = integrate(p, random_state3(rng), horizon(80.0));
    const DiagnosticReport r = lyapunov_trace(LyapunovKind::SubcriticalBaseline, p, traj);
    EXPECT_TRUE(r.pass) << r.worst;
    ++checked;
  }
}

TEST(Lyapunov, SubcriticalFourGroupMonotone) {
  Rng rng(34);
  int checked = 0;
  while (checked < 30) {
    const FourGroupParams p = random_four_group(rng);
    if (r_rad(p.base) > 1.0) continue;
    const Trajectory4 traj = integrate(p, random_state4(rng), horizon(80.0));
    const DiagnosticReport r = lyapunov_trace(LyapunovKind::Subcritical4Group, p, traj);
    EXPECT_TRUE(r.pass) << r.worst;
    ++checked;
  }
}

TEST(Lyapunov, SymmetricFourGroupMonotone) {
  const FourGroupParams p = symmetric4(0.2, 0.1, 0.4, 0.7, 0.1);
  const Trajectory4 traj = integrate(p, {0.05, 0.05, 0.6}, horizon(100.0));
  EXPECT_TRUE(lyapunov_trace(LyapunovKind::Symmetric4Group, p, traj).pass);
}

TEST(Lyapunov, EtaRecipe) {
  const FourGroupParams p = toy_four_group();
  const Vector2 q = metzler_perron(recruitment_matrix(p.base) - decay_matrix(p.base)).left;
  const Matrix2 E = mobilisation_matrix(p) - recruitment_matrix(p.base);
  const double w1 = q[0] * E.a11 + q[1] * E.a21, w2 = q[0] * E.a12 + q[1] * E.a22;
  EXPECT_NEAR(lyapunov_eta(p, q), std::max({0.0, w1 / p.delta_L, w2 / p.delta_R}) + 1e-6, 1e-15);
}

TEST(Lyapunov, RegimeMismatch) {
  const BaselineParams super = validate_baseline({0.40, 0.25, 0.28, 0.32, 0.15, 0.08});
  const Trajectory3 traj = integrate(super, {0.1, 0.1}, horizon(10.0));
  try {
    lyapunov_trace(LyapunovKind::SubcriticalBaseline, super, traj);
    FAIL() << "expected RegimeMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RegimeMismatch);
  }
  const FourGroupParams p = symmetric4(0.3, 0.2, 0.4, 0.7, 0.1);
  const Trajectory4 t4 = integrate(p, {0.1, 0.1, 0.1}, horizon(10.0));
  EXPECT_THROW(lyapunov_trace(LyapunovKind::Symmetric4Group, p, t4), Error);
  EXPECT_THROW(lyapunov_trace(LyapunovKind::SubcriticalBaseline, p, t4), Error);
}

TEST(Lyapunov, DetectsGenuineIncrease) {
  const BaselineParams p = asym_left();
  Trajectory3 traj;
  traj.regimes.push_back(p);
  traj.push(0.0, {0.1, 0.1}, 0);
  traj.push(1.0, {0.2, 0.1}, 0);
  const DiagnosticReport r = lyapunov_trace(LyapunovKind::SubcriticalBaseline, p, traj);
  EXPECT_FALSE(r.pass);
  ASSERT_EQ(r.witness.size(), 1u);
  EXPECT_EQ(r.witness[0], 1.0);
}

TEST(BoundaryInflow, BaselineFaces) {
  const BaselineParams p = asym_left();
  EXPECT_NEAR(rhs_baseline(p, {0.0, 0.5})[0], p.gamma_RL * 0.25, 1e-16);
  const Vector2 f = rhs_baseline(p, {0.3, 0.7});
  EXPECT_NEAR(f[0], -p.mu_L * 0.3, 1e-15);
  EXPECT_NEAR(f[1], -p.mu_R * 0.7, 1e-15);
  EXPECT_TRUE(boundary_inflow_check(p, 500).pass);
}

TEST(BoundaryInflow, FourGroupFaces) {
  const FourGroupParams p = toy_four_group();
  const Vector3 f = rhs_4group(p, {0.3, 0.3, 0.4});
  const double Cdot = -(f[0] + f[1] + f[2]);
  EXPECT_NEAR(Cdot, 0.3 * p.base.mu_L + 0.3 * p.base.mu_R + 0.4 * p.rho, 1e-15);
  EXPECT_GT(Cdot, 0.0);
  Rng rng(35);
  for (int i = 0; i < 50; ++i) {
    EXPECT_TRUE(boundary_inflow_check(random_four_group(rng), 30).pass);
    EXPECT_TRUE(boundary_inflow_check(random_baseline(rng), 200).pass);
  }
}

TEST(BoundaryInflow, FlagsOutwardField) {
  const BaselineParams p = asym_left();
  const DiagnosticReport r = boundary_inflow_check_field(
      [&](const SimplexState3& s) {
        Vector2 f = rhs_baseline(p, s);
        f[0] -= 0.01;
        return f;
      },
      100);
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.witness.empty());
}

TEST(ADecay, TightOnDisengagedAxis) {
  const FourGroupParams p = toy_four_group();
  const Trajectory4 traj = integrate(p, {0.0, 0.0, 0.5}, horizon(60.0));
  const DiagnosticReport r = a_decay_check(p, traj);
  EXPECT_TRUE(r.pass);
  EXPECT_LT(std::abs(r.worst), 1e-9);
}

TEST(ADecay, StrictWithRadicalsPresent) {
  const FourGroupParams p = toy_four_group();
  const Trajectory4 traj = integrate(p, {0.1, 0.1, 0.5}, horizon(60.0));
  const DiagnosticReport r = a_decay_check(p, traj);
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.worst, -1e-3);
}

TEST(ADecay, ZeroStaysZero) {
  const FourGroupParams p = toy_four_group();
  const Trajectory4 traj = integrate(p, {0.1, 0.1, 0.0}, horizon(60.0));
  for (const auto& s : traj.states) ASSERT_EQ(s.A, 0.0);
  EXPECT_TRUE(a_decay_check(p, traj).pass);
}

TEST(ADecay, ReanchorsAtShocks) {
  ShockEvent e;
  e.time = 10.0;
  e.delta = 0.5;
  const FourGroupParams p = symmetric4(0.2, 0.1, 0.4, 0.7, 0.1);
  const auto [traj, report] = run_shock_sequence(p, {0.01, 0.01, 0.2}, {e}, horizon(60.0));
  EXPECT_TRUE(a_decay_check(p, traj).pass);
}

TEST(Invariance, FlagsExcursion) {
  Trajectory3 traj;
  traj.push(0.0, {0.2, 0.2}, 0);
  EXPECT_TRUE(invariance_check(traj).pass);
  traj.push(1.0, {-1e-6, 0.2}, 0);
  const DiagnosticReport r = invariance_check(traj);
  EXPECT_FALSE(r.pass);
  EXPECT_NEAR(r.worst, 1e-6, 1e-18);
}

TEST(JacobianFd, SmallEverywhere) {
  Rng rng(36);
  for (int i = 0; i < 200; ++i) {
    const FourGroupParams p = random_four_group(rng);
    EXPECT_LT(jacobian_fd_error(p.base, random_state3(rng)), 1e-6);
    EXPECT_LT(jacobian_fd_error(p, random_state4(rng)), 1e-6);
  }
}

TEST(VerifySuite, DefaultSeedPasses) {
  VerifyOptions o;
  o.draws = 20;
  const auto reports = run_verify_suite(o);
  for (const auto& r : reports) EXPECT_TRUE(r.pass) << r.name << " " << r.detail;
  EXPECT_TRUE(all_pass(reports));
}

TEST(VerifySuite, DeterministicForSeed) {
  VerifyOptions o;
  o.draws = 20;
  o.workers = 3;
  const auto a = run_verify_suite(o);
  o.workers = 1;
  const auto b = run_verify_suite(o);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].worst, b[i].worst) << a[i].name;
    EXPECT_EQ(a[i].samples, b[i].samples) << a[i].name;
  }
}

TEST(VerifySuite, CorruptedFieldIsCaughtWithWitness) {
  VerifyOptions o;
  o.draws = 20;
  // Reactive-polarisation term of the left equation with its sign flipped.
  o.baseline_field = [](const BaselineParams& p, const SimplexState3& s) {
    const double C = s.C();
    return Vector2{p.alpha_L * s.L * C - p.mu_L * s.L - p.gamma_RL * s.R * C,
                   p.alpha_R * s.R * C - p.mu_R * s.R + p.gamma_LR * s.L * C};
  };
  const auto dulac = verify_dulac(o);
  const DiagnosticReport inflow = verify_boundary_inflow(o);
  const auto traj = verify_trajectories(o);
  EXPECT_TRUE(dulac[0].pass);
  const bool caught = !dulac[1].pass || !traj[0].pass;
  EXPECT_TRUE(caught);
  if (!dulac[1].pass) {
    EXPECT_EQ(dulac[1].witness.size(), 3u);
    EXPECT_GE(dulac[1].worst, 0.0);
  }
  EXPECT_FALSE(inflow.pass);
  EXPECT_FALSE(inflow.witness.empty());
  EXPECT_FALSE(all_pass(run_verify_suite(o)));
}
