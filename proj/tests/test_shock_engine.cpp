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

#include <algorithm>
#include <cmath>
#include <variant>

#include "oracles.hpp"
#include "polarsim/random.hpp"
#include "polarsim/shocks.hpp"
#include "polarsim/verification.hpp"

using namespace polarsim;
using namespace polarsim::testing;

namespace {

ShockEvent shock(double time, double delta, double dbeta = 0.0) {
  ShockEvent e;
  e.time = time;
  e.delta = delta;
  e.dbeta = dbeta;
  return e.validated();
}

IntegratorConfig horizon(double t_end, double sample = 0.1) {
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  cfg.sample_interval = sample;
  return cfg;
}

FourGroupParams regimes_params() { return symmetric4(0.20, 0.10, 0.40, 0.70, 0.10); }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no polarsim::Error thrown";
  return ErrorCode::ConfigError;
}

}  // namespace

TEST(ApplyImpulse, Examples) {
  const SimplexState4 a = apply_impulse({0.1, 0.1, 0.0}, 0.25);
  EXPECT_NEAR(a.A, 0.2, 1e-15);
  EXPECT_NEAR(a.C(), 0.6, 1e-15);
  const SimplexState4 s{0.2, 0.1, 0.3};
  EXPECT_EQ(apply_impulse(s, 0.0), s);
  const SimplexState4 b = apply_impulse({0.0, 0.0, 0.0}, 0.55);
  EXPECT_EQ(b.A, 0.55);
  EXPECT_NEAR(b.C(), 0.45, 1e-15);
  EXPECT_EQ(code_of([] { apply_impulse({0.1, 0.1, 0.0}, 1.0); }), ErrorCode::OutOfRange);
}

TEST(ApplyImpulse, ConservesRadicalShares) {
  Rng rng(21);
  for (int i = 0; i < 5000; ++i) {
    const SimplexState4 s = random_state4(rng);
    const double d = rng.uniform01() * 0.999;
    const SimplexState4 t = apply_impulse(s, d);
    ASSERT_EQ(t.L, s.L);
    ASSERT_EQ(t.R, s.R);
    ASSERT_NEAR(t.L + t.R + t.A + t.C(), 1.0, 1e-15);
    ASSERT_NEAR(t.C(), (1.0 - d) * s.C(), 1e-15);
  }
}

TEST(ApplyStructural, SymmetricShift) {
  const FourGroupParams p = regimes_params();
  const FourGroupParams q = apply_structural(p, shock(5.0, 0.55, 0.15));
  ASSERT_TRUE(symmetric_beta(q).has_value());
  EXPECT_NEAR(*symmetric_beta(q), 0.45, 1e-15);
  EXPECT_EQ(q.base.mu_L, p.base.mu_L);
  EXPECT_EQ(q.delta_L, p.delta_L);
  EXPECT_EQ(apply_structural(p, shock(5.0, 0.55)), p);
}

TEST(ApplyStructural, CalibratedDrift) {
  SymmetricParams s{0.10, 0.08, 0.22, 0.5, 0.1};
  EXPECT_NEAR(s.beta(), 0.18, 1e-15);
  s = apply_structural(s, shock(1.0, 0.0, 0.069));
  EXPECT_NEAR(s.beta(), 0.249, 1e-15);
  s = apply_structural(s, shock(2.0, 0.0, 0.0427));
  EXPECT_NEAR(s.beta(), 0.2917, 1e-15);
}

TEST(ApplyStructural, ReplacementWins) {
  ShockEvent e = shock(1.0, 0.2, 0.0);
  e.replacement = toy_four_group();
  EXPECT_EQ(apply_structural(regimes_params(), e), toy_four_group());
  EXPECT_EQ(code_of([&] { apply_structural(SymmetricParams{0.1, 0.1, 0.3, {}, {}}, e); }), ErrorCode::RegimeMismatch);
}

TEST(Kstar, Examples) {
  EXPECT_EQ(kstar(0.30, 0.40, {0.04, 0.04, 0.04, 0.04}), std::optional<std::size_t>(3));
  EXPECT_FALSE(kstar(0.30, 0.40, {0.05}).has_value());
  EXPECT_EQ(kstar(0.18, 0.22, {0.069, 0.043}), std::optional<std::size_t>(1));
  EXPECT_EQ(code_of([] { kstar(0.4, 0.4, {0.1}); }), ErrorCode::RegimeError);
}

TEST(Kstar, MatchesDirectSummationOverRandomSequences) {
  Rng rng(22);
  for (int i = 0; i < 2000; ++i) {
    const double mu = rng.uniform(0.1, 1.0), beta0 = rng.uniform(0.0, 0.99) * mu;
    std::vector<double> d(1 + rng.next_u64() % 6);
    for (double& v : d) v = rng.uniform(0.0, 0.2);
    std::optional<std::size_t> expected;
    double B = beta0;
    for (std::size_t k = 0; k < d.size() && !expected; ++k) {
      B += d[k];
      if (B - beta0 > mu - beta0) expected = k + 1;
    }
    ASSERT_EQ(kstar(beta0, mu, d), expected);
  }
}

TEST(LongrunFloor, Examples) {
  EXPECT_NEAR(longrun_floor(0.45, 0.40, true), 0.8889, 1e-4);
  EXPECT_NEAR(longrun_floor(0.2917, 0.22, true), 0.7542, 1e-4);
  EXPECT_NEAR(1.0 - longrun_floor(0.2917, 0.22, true), 0.2458, 1e-4);
  EXPECT_EQ(longrun_floor(0.50, 0.40, false), 1.0);
  EXPECT_EQ(longrun_floor(0.35, 0.40, true), 1.0);
  const FourGroupParams p = validate_four_group({validate_baseline({0.40, 0.25, 0.28, 0.32, 0.15, 0.08}), 0.6, 0.5, 0.1});
  EXPECT_NEAR(longrun_floor(p, true), 1.0 / r_rad(p.base), 1e-15);
}

TEST(SurgeThreshold, Examples) {
  EXPECT_NEAR(surge_threshold_exact(0.0, 0.30, 0.40, 0.70), 0.25, 1e-15);
  EXPECT_NEAR(surge_threshold_exact(0.1, 0.30, 0.40, 0.70), 0.40, 1e-15);
  EXPECT_GT(surge_threshold_exact(0.2, 0.30, 0.40, 0.70), surge_threshold_exact(0.1, 0.30, 0.40, 0.70));
  EXPECT_EQ(code_of([] { surge_threshold_exact(0.1, 0.3, 0.4, 0.3); }), ErrorCode::FormulaInapplicable);
}

TEST(SurgeThreshold, SignChangeOfReducedField) {
  const SymmetricReduced red{0.30, 0.40, 0.70, 0.10};
  for (double P0 : {0.01, 0.1, 0.2, 0.3}) {
    const double oracle = bisect([&](double A) { return red.rhs(P0, A)[0]; }, 0.0, 1.0);
    EXPECT_NEAR(surge_threshold_exact(P0, 0.30, 0.40, 0.70), oracle, 1e-12);
  }
}

TEST(WindowBoundSym, Examples) {
  EXPECT_NEAR(window_bound_sym(0.55, 0.30, 0.40, 0.70, 0.10), 10.0 * std::log(2.2), 1e-12);
  EXPECT_NEAR(window_bound_sym(0.55, 0.30, 0.40, 0.70, 0.10), 7.885, 1e-3);
  EXPECT_EQ(window_bound_sym(0.25, 0.30, 0.40, 0.70, 0.10), 0.0);
  EXPECT_NEAR(window_bound_sym(0.55, 0.30, 0.40, 0.70, 0.20), 0.5 * window_bound_sym(0.55, 0.30, 0.40, 0.70, 0.10),
              1e-15);
  EXPECT_EQ(code_of([] { window_bound_sym(0.10, 0.30, 0.40, 0.70, 0.10); }), ErrorCode::BelowThreshold);
  EXPECT_EQ(code_of([] { window_bound_sym(0.50, 0.20, 0.40, 0.30, 0.10); }), ErrorCode::BelowThreshold);
}

TEST(WindowBoundAsym, SymmetricCaseEqualsClosedForm) {
  const AsymWindow w = window_bound_asym(0.55, regimes_params());
  ASSERT_TRUE(std::holds_alternative<WindowBound>(w));
  EXPECT_NEAR(std::get<WindowBound>(w).delta_q, 0.25, 1e-12);
  EXPECT_NEAR(std::get<WindowBound>(w).t_q, window_bound_sym(0.55, 0.30, 0.40, 0.70, 0.10), 1e-10);
}

TEST(WindowBoundAsym, MonotoneDecayCases) {
  const BaselineParams b = validate_baseline({0.1, 0.1, 0.4, 0.4, 0.1, 0.1});
  EXPECT_TRUE(std::holds_alternative<MonotoneDecay>(window_bound_asym(0.9, validate_four_group({b, 0.05, 0.05, 0.1}))));
  EXPECT_TRUE(std::holds_alternative<MonotoneDecay>(window_bound_asym(0.20, toy_four_group())));
  const BaselineParams super = validate_baseline({0.40, 0.25, 0.28, 0.32, 0.15, 0.08});
  EXPECT_EQ(code_of([&] { window_bound_asym(0.3, validate_four_group({super, 0.6, 0.5, 0.1})); }),
            ErrorCode::BaselineSupercritical);
}

TEST(WindowBoundAsym, ToyWeightedMassDecaysAfterWindow) {
  const FourGroupParams p = toy_four_group();
  const AsymWindow w = window_bound_asym(0.25, p);
  ASSERT_TRUE(std::holds_alternative<WindowBound>(w));
  const WindowBound b = std::get<WindowBound>(w);
  EXPECT_GT(b.t_q, 0.0);
  // Independent oracle for delta_q from the left Perron vector of K - M.
  const Matrix2 G = recruitment_matrix(p.base) - decay_matrix(p.base);
  const double s0 = dominant_root(G);
  const double q1 = G.a21, q2 = s0 - G.a11;
  const Matrix2 E = mobilisation_matrix(p) - recruitment_matrix(p.base);
  const double kappa = std::max((q1 * E.a11 + q2 * E.a21) / q1, (q1 * E.a12 + q2 * E.a22) / q2);
  EXPECT_NEAR(b.delta_q, -s0 / kappa, 1e-12);

  const double t_shock = 1.0;
  const auto [traj, report] = run_shock_sequence(p, {0.01, 0.01, 0.0}, {shock(t_shock, 0.25)}, horizon(80.0, 0.05));
  const Vector2 q = metzler_perron(G).left;
  double prev = -1.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.times[i] < t_shock + b.t_q) continue;
    const double V = q[0] * traj.states[i].L + q[1] * traj.states[i].R;
    if (prev >= 0.0) {
      ASSERT_LE(V, prev + 1e-12) << "t=" << traj.times[i];
    }
    prev = V;
  }
}

TEST(RunShockSequence, EmptySequenceIsPlainIntegration) {
  const FourGroupParams p = regimes_params();
  const auto [traj, report] = run_shock_sequence(p, {0.01, 0.01, 0.2}, {}, horizon(20.0));
  EXPECT_TRUE(report.shocks.empty());
  EXPECT_FALSE(report.k_star.has_value());
  const Trajectory4 plain = integrate(p, {0.01, 0.01, 0.2}, horizon(20.0));
  ASSERT_EQ(traj.size(), plain.size());
  EXPECT_EQ(traj.final_state(), plain.final_state());
}

TEST(RunShockSequence, PreAndPostSamplesShareTimestamp) {
  const auto [traj, report] = run_shock_sequence(regimes_params(), {0.01, 0.01, 0.0}, {shock(5.0, 0.55)}, horizon(20.0));
  ASSERT_EQ(traj.events.size(), 1u);
  const std::size_t k = traj.events[0].sample;
  EXPECT_EQ(traj.times[k], 5.0);
  EXPECT_EQ(traj.times[k - 1], 5.0);
  EXPECT_EQ(traj.states[k], apply_impulse(traj.states[k - 1], 0.55));
  EXPECT_EQ(report.shocks[0].pre, traj.states[k - 1]);
  EXPECT_EQ(report.shocks[0].post, traj.states[k]);
}

TEST(RunShockSequence, PureStateShockSurgesThenRecovers) {
  const auto [traj, report] = run_shock_sequence(regimes_params(), {0.01, 0.01, 0.0}, {shock(5.0, 0.55)}, horizon(400.0));
  const ShockRecord& r = report.shocks[0];
  EXPECT_TRUE(r.surge.surged);
  EXPECT_EQ(r.floor, 1.0);
  ASSERT_TRUE(r.surge.end_time.has_value());
  EXPECT_LE(*r.surge.end_time - 5.0, 10.0 * std::log(2.2));
  EXPECT_NEAR(traj.final_state().C(), 1.0, 1e-3);
}

TEST(RunShockSequence, SmallShockDoesNotSurge) {
  const auto [traj, report] = run_shock_sequence(regimes_params(), {0.01, 0.01, 0.0}, {shock(5.0, 0.10)}, horizon(200.0));
  EXPECT_FALSE(report.shocks[0].surge.surged);
  EXPECT_FALSE(report.shocks[0].window.has_value());
}

TEST(RunShockSequence, StaircaseReport) {
  std::vector<ShockEvent> shocks;
  for (double t : {10.0, 25.0, 40.0, 60.0}) shocks.push_back(shock(t, 0.40, 0.04));
  const auto [traj, report] = run_shock_sequence(regimes_params(), {0.01, 0.01, 0.0}, shocks, horizon(150.0));
  EXPECT_EQ(report.k_star, std::optional<std::size_t>(3));
  ASSERT_EQ(report.shocks.size(), 4u);
  const double expected[] = {1.0, 1.0, 0.40 / 0.42, 0.40 / 0.46};
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(*report.shocks[k].B, 0.30 + 0.04 * static_cast<double>(k + 1), 1e-15);
    EXPECT_NEAR(report.shocks[k].floor, expected[k], 1e-12);
    if (k > 0) {
      EXPECT_GE(*report.shocks[k].B, *report.shocks[k - 1].B);
    }
    if (k >= 3) {
      EXPECT_LT(report.shocks[k].floor, report.shocks[k - 1].floor);
    }
  }
}

TEST(RunShockSequence, SimulatedFloorMatchesClosedForm) {
  const auto [traj, report] =
      run_shock_sequence(regimes_params(), {0.01, 0.01, 0.0}, {shock(5.0, 0.55, 0.15)}, horizon(2000.0, 1.0));
  EXPECT_NEAR(traj.final_state().C(), 0.40 / 0.45, 1e-3);
  EXPECT_NEAR(report.shocks[0].floor, 0.40 / 0.45, 1e-15);
}

TEST(RunShockSequence, FloorsIndependentOfStateAmplitude) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ShockEvent> a, b;
    for (int k = 0; k < 3; ++k) {
      const double dbeta = rng.uniform(0.0, 0.1), t = 5.0 + 10.0 * k;
      a.push_back(shock(t, rng.uniform(0.0, 0.9), dbeta));
      b.push_back(shock(t, rng.uniform(0.0, 0.9), dbeta));
    }
    const auto ra = run_shock_sequence(regimes_params(), {0.01, 0.01, 0.0}, a, horizon(40.0, 1.0)).second;
    const auto rb = run_shock_sequence(regimes_params(), {0.01, 0.01, 0.0}, b, horizon(40.0, 1.0)).second;
    for (std::size_t k = 0; k < 3; ++k) ASSERT_EQ(ra.shocks[k].floor, rb.shocks[k].floor);
    ASSERT_EQ(ra.k_star, rb.k_star);
  }
}

TEST(RunShockSequence, SeedInvariance) {
  Rng rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const FourGroupParams p = random_symmetric_four_group(rng, 0.05, 1.0);
    const auto [traj, report] = run_shock_sequence(
        p, {0.0, 0.0, rng.uniform(0.0, 0.5)}, {shock(2.0, rng.uniform(0.0, 0.9), rng.uniform(0.0, 0.5))},
        horizon(60.0, 0.5));
    for (const SimplexState4& s : traj.states) {
      ASSERT_LT(s.L, 1e-12);
      ASSERT_LT(s.R, 1e-12);
    }
    EXPECT_EQ(report.shocks[0].floor, 1.0);
  }
}

TEST(RunShockSequence, WindowSoundnessOverRandomDraws) {
  Rng rng(25);
  int checked = 0;
  while (checked < 100) {
    SymmetricParams s{rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5), rng.uniform(0.05, 1.0),
                      rng.uniform(0.05, 1.5), rng.uniform(0.05, 0.5)};
    const double beta = s.beta();
    if (beta >= s.mu || *s.delta <= beta) continue;
    const Threshold dc = delta_c_sym(beta, s.mu, *s.delta);
    if (is_shock_proof(dc) || std::get<double>(dc) > 0.85) continue;
    const double delta_shock = rng.uniform(std::get<double>(dc), 0.95);
    const double P0 = rng.uniform(1e-4, 0.02);
    const double sample = 0.05;
    const auto [traj, report] = run_shock_sequence(s.to_four_group(), {P0, P0, 0.0}, {shock(1.0, delta_shock)},
                                                   horizon(1.0 + 80.0 / *s.rho, sample));
    const ShockRecord& r = report.shocks[0];
    ASSERT_TRUE(r.window.has_value());
    const double t_star = window_bound_sym(delta_shock, beta, s.mu, *s.delta, *s.rho);
    if (r.surge.end_time) {
      ASSERT_LE(*r.surge.end_time - 1.0, t_star + sample) << "draw " << checked;
    }
    ++checked;
  }
}

TEST(RunShockSequence, RejectsBadShockTimes) {
  const FourGroupParams p = regimes_params();
  EXPECT_EQ(code_of([&] { run_shock_sequence(p, {0.01, 0.01, 0.0}, {shock(5.0, 0.1), shock(5.0, 0.1)}, horizon(10.0)); }),
            ErrorCode::OutOfRange);
  EXPECT_EQ(code_of([&] { run_shock_sequence(p, {0.01, 0.01, 0.0}, {shock(50.0, 0.1)}, horizon(10.0)); }),
            ErrorCode::OutOfRange);
}

TEST(RunShockSequence, AsymmetricReplacementChannel) {
  ShockEvent e = shock(5.0, 0.35);
  e.replacement = validate_four_group({validate_baseline({0.40, 0.25, 0.28, 0.32, 0.15, 0.08}), 0.6, 0.5, 0.1});
  const auto [traj, report] = run_shock_sequence(toy_four_group(), {0.01, 0.01, 0.0}, {e}, horizon(50.0, 0.5));
  EXPECT_EQ(report.shocks[0].regime_before, Regime::Subcritical);
  EXPECT_EQ(report.shocks[0].regime_after, Regime::Supercritical);
  EXPECT_EQ(report.k_star, std::optional<std::size_t>(1));
  EXPECT_NEAR(report.shocks[0].floor, 1.0 / r_rad(e.replacement->base), 1e-15);
  EXPECT_FALSE(report.shocks[0].B.has_value());
}
