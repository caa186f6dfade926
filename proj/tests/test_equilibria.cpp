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
#include <complex>

#include "oracles.hpp"
#include "polarsim/equilibria.hpp"
#include "polarsim/random.hpp"
#include "polarsim/verification.hpp"

using namespace polarsim;
using namespace polarsim::testing;

namespace {

BaselineParams symmetric3(double alpha, double gamma, double mu) {
  return SymmetricParams{alpha, gamma, mu, {}, {}}.to_baseline();
}

std::complex<double> det3_shifted(const Matrix3& J, std::complex<double> z) {
  using cd = std::complex<double>;
  cd a[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a[i][j] = cd(J[i][j]) - (i == j ? z : cd(0.0));
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

}  // namespace

TEST(SymmetricEquilibrium, ReferenceValues) {
  const auto centre = symmetric_equilibrium(0.40, 0.20);
  ASSERT_TRUE(centre.has_value());
  EXPECT_NEAR(centre->P, 0.25, 1e-12);
  EXPECT_NEAR(centre->C, 0.50, 1e-12);
  const auto right = symmetric_equilibrium(0.75, 0.20);
  ASSERT_TRUE(right.has_value());
  EXPECT_NEAR(right->P, 0.367, 1e-3);
  EXPECT_NEAR(right->C, 0.267, 1e-3);
  EXPECT_NEAR(right->P, (0.75 - 0.20) / (2.0 * 0.75), 1e-15);
  EXPECT_FALSE(symmetric_equilibrium(0.22, 0.25).has_value());
}

TEST(InteriorEquilibrium, ReferenceValuesAndResidual) {
  const BaselineParams p = validate_baseline({0.40, 0.25, 0.28, 0.32, 0.15, 0.08});
  const auto e = interior_equilibrium(p);
  ASSERT_TRUE(e.has_value());
  EXPECT_NEAR(e->L, 0.285, 1e-3);
  EXPECT_NEAR(e->R, 0.088, 1e-3);
  EXPECT_NEAR(e->C, 0.628, 1e-3);
  const auto f = field3(p, e->L, e->R);
  EXPECT_LT(std::max(std::abs(f[0]), std::abs(f[1])), 1e-10);
  EXPECT_FALSE(interior_equilibrium(asym_left()).has_value());
}

TEST(InteriorEquilibrium, SymmetricMatchesClosedForm) {
  const auto e = interior_equilibrium(symmetric3(0.25, 0.15, 0.20));
  ASSERT_TRUE(e.has_value());
  EXPECT_NEAR(e->L, 0.25, 1e-15);
  EXPECT_NEAR(e->R, 0.25, 1e-15);
}

TEST(InteriorEquilibrium, ExistsIffPerronRootAboveOne) {
  Rng rng(10);
  for (int draw = 0; draw < 5000; ++draw) {
    const BaselineParams p = random_baseline(rng, 1e-3, 1.0);
    const double lambda = r_rad(p);
    const auto e = interior_equilibrium(p);
    ASSERT_EQ(e.has_value(), lambda > 1.0) << "draw " << draw;
    if (!e) continue;
    const auto f = field3(p, e->L, e->R);
    ASSERT_LT(std::max(std::abs(f[0]), std::abs(f[1])), 1e-10) << "draw " << draw;
    ASSERT_GT(e->L, 0.0);
    ASSERT_GT(e->R, 0.0);
    ASSERT_GT(e->C, 0.0);
    const Matrix2 J = jacobian_baseline(p, e->state());
    ASSERT_LT(J.trace(), 0.0) << "draw " << draw;
    ASSERT_GT(J.det(), 0.0) << "draw " << draw;
    ASSERT_TRUE(is_stable(classify(J)));
  }
}

TEST(Classify, GenericSymmetricInteriorIsStableNode) {
  const auto e = interior_equilibrium(symmetric3(0.25, 0.15, 0.20));
  EXPECT_EQ(classify(jacobian_baseline(symmetric3(0.25, 0.15, 0.20), e->state())), Stability::StableNode);
}

TEST(Classify, StarLocus) {
  // 2 gamma mu = beta (beta - mu) with mu = 0.2, beta = 0.5.
  const double mu = 0.2, beta = 0.5, gamma = beta * (beta - mu) / (2.0 * mu);
  const BaselineParams p = symmetric3(beta - gamma, gamma, mu);
  const auto e = interior_equilibrium(p);
  ASSERT_TRUE(e.has_value());
  const Matrix2 J = jacobian_baseline(p, e->state());
  EXPECT_EQ(classify(J), Stability::StableStar);
  const Eigenvalues ev = eigenvalues(J);
  EXPECT_NEAR(ev[0].real(), mu - beta, 1e-12);
  EXPECT_NEAR(ev[1].real(), -2.0 * gamma * mu / beta, 1e-12);
}

TEST(Classify, FourGroupCentristSaddle) {
  const FourGroupParams p = symmetric4(0.15, 0.1, 0.2, 0.7, 0.1);
  const Matrix3 J = jacobian_4group(p, {0.0, 0.0, 0.0});
  EXPECT_EQ(classify(J), Stability::Saddle);
  Eigenvalues ev = eigenvalues(J);
  std::vector<double> re;
  for (const auto& z : ev) re.push_back(z.real());
  std::sort(re.begin(), re.end());
  EXPECT_NEAR(re.back(), 0.25 - 0.2, 1e-14);
  EXPECT_NEAR(re.front(), 0.15 - 0.2 - 0.1, 1e-14);
  EXPECT_TRUE(std::any_of(re.begin(), re.end(), [&](double x) { return std::abs(x + p.rho) < 1e-14; }));
}

TEST(Classify, ConsistentWithEigenvalueSigns) {
  Rng rng(12);
  int foci = 0;
  for (int draw = 0; draw < 5000; ++draw) {
    const Matrix2 J{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Stability s = classify(J);
    const auto roots = char_roots(J);
    const double r1 = static_cast<double>(roots.first.real()), r2 = static_cast<double>(roots.second.real());
    if (r1 < 0.0 && r2 < 0.0) {
      ASSERT_TRUE(is_stable(s)) << to_string(s);
    } else if (r1 * r2 < 0.0) {
      ASSERT_EQ(s, Stability::Saddle);
    } else {
      ASSERT_FALSE(is_stable(s));
    }
    foci += s == Stability::StableFocus;
  }
  EXPECT_GT(foci, 0);
}

TEST(Eigenvalues3, RootsOfCharacteristicPolynomial) {
  Rng rng(13);
  for (int draw = 0; draw < 2000; ++draw) {
    Matrix3 J{};
    for (auto& row : J)
      for (double& v : row) v = rng.uniform(-1, 1);
    const Eigenvalues ev = eigenvalues(J);
    ASSERT_EQ(ev.size(), 3u);
    std::complex<double> sum = 0.0;
    for (const auto& z : ev) {
      ASSERT_LT(std::abs(det3_shifted(J, z)), 1e-9) << "draw " << draw;
      sum += z;
    }
    ASSERT_NEAR(sum.real(), J[0][0] + J[1][1] + J[2][2], 1e-9);
  }
}

TEST(Eigenvalues3, BlockTriangularInheritsBaseline) {
  Rng rng(14);
  for (int draw = 0; draw < 500; ++draw) {
    const FourGroupParams p = random_four_group(rng, 0.05, 1.0);
    const auto e = interior_equilibrium(p.base);
    if (!e) continue;
    const Matrix3 J = jacobian_4group(p, {e->L, e->R, 0.0});
    const Eigenvalues ev = eigenvalues(J);
    const double third = -(p.delta_L * e->L + p.delta_R * e->R + p.rho);
    const bool found = std::any_of(ev.begin(), ev.end(), [&](const std::complex<double>& z) {
      return std::abs(z - std::complex<double>(third)) < 1e-12;
    });
    ASSERT_TRUE(found) << "draw " << draw;
    ASSERT_TRUE(is_stable(classify(J)));
  }
}

TEST(E0Stability, Examples) {
  EXPECT_EQ(e0_stability(symmetric3(0.1, 0.1, 0.3)), E0Stability::Stable);
  EXPECT_EQ(e0_stability(symmetric3(0.3, 0.1, 0.3)), E0Stability::Unstable);
  EXPECT_EQ(e0_stability(asym_left()), E0Stability::Stable);
}

TEST(E0Stability, AgreesWithPerronRoot) {
  Rng rng(15);
  for (int draw = 0; draw < 10000; ++draw) {
    const BaselineParams p = random_baseline(rng, 1e-3, 1.0);
    const double lambda = r_rad(p);
    if (std::abs(lambda - 1.0) < 1e-9) continue;
    ASSERT_EQ(e0_stability(p) == E0Stability::Stable, lambda < 1.0) << "draw " << draw;
  }
}

TEST(ComparativeStatics, SymmetricShares) {
  Rng rng(16);
  for (int draw = 0; draw < 2000; ++draw) {
    const double alpha = rng.uniform(0.01, 1), gamma = rng.uniform(0.01, 1), mu = rng.uniform(0.01, 1);
    const auto base = interior_equilibrium(symmetric3(alpha, gamma, mu));
    if (!base || alpha + gamma - mu < 0.01) continue;
    EXPECT_GT(interior_equilibrium(symmetric3(alpha + 1e-3, gamma, mu))->L, base->L);
    EXPECT_GT(interior_equilibrium(symmetric3(alpha, gamma + 1e-3, mu))->L, base->L);
    EXPECT_LT(interior_equilibrium(symmetric3(alpha, gamma, mu + 1e-3))->L, base->L);
    EXPECT_GT(base->C, 0.0);
  }
}

TEST(EquilibriumReports, BaselineAndFourGroup) {
  const BaselineParams sub = asym_left();
  const auto r = equilibrium_reports(sub);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_TRUE(r[0].exists);
  EXPECT_TRUE(is_stable(r[0].classification));
  EXPECT_FALSE(r[1].exists);

  const FourGroupParams p = validate_four_group({validate_baseline({0.40, 0.25, 0.28, 0.32, 0.15, 0.08}), 0.6, 0.5, 0.1});
  const auto r4 = equilibrium_reports(p);
  ASSERT_EQ(r4.size(), 2u);
  EXPECT_EQ(r4[0].classification, Stability::Saddle);
  EXPECT_TRUE(r4[1].exists);
  EXPECT_TRUE(is_stable(r4[1].classification));
  EXPECT_EQ(r4[1].location.A, 0.0);
}

TEST(Transcritical, CertificateValues) {
  const auto c = transcritical_certificate(0.20);
  EXPECT_EQ(c.f, 0.0);
  EXPECT_EQ(c.f_P, 0.0);
  EXPECT_NEAR(c.f_PP, -0.80, 1e-15);
  EXPECT_EQ(c.f_Pbeta, 1.0);
  EXPECT_NEAR(transcritical_certificate(0.40).f_PP, -1.60, 1e-15);
  EXPECT_THROW(transcritical_certificate(0.0), Error);
}

TEST(Transcritical, SecondDifferenceOfScalarField) {
  for (double mu : {0.1, 0.2, 0.4, 0.9}) {
    const double beta = mu, h = 1e-4;
    auto f = [&](double P, double b) { return P * (b * (1.0 - 2.0 * P) - mu); };
    const double fpp = (f(h, beta) - 2.0 * f(0.0, beta) + f(-h, beta)) / (h * h);
    EXPECT_NEAR(fpp, transcritical_certificate(mu).f_PP, 1e-6);
    const double fpb = (f(h, beta + h) - f(h, beta - h) - f(-h, beta + h) + f(-h, beta - h)) / (4.0 * h * h);
    EXPECT_NEAR(fpb, transcritical_certificate(mu).f_Pbeta, 1e-6);
  }
}
