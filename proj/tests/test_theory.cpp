#include <cmath>

#include <gtest/gtest.h>

#include "lowrank/error.hpp"
#include "lowrank/theory.hpp"

using namespace lowrank;
using namespace lowrank::theory;

namespace {

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

ProblemInstance gaussianEnsemble(Index n, Index r, Index m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Matrix> a;
  for (Index l = 0; l < m; ++l) a.push_back(gaussian(n, n, rng));
  auto op = MeasurementOp::denseEnsemble(a);
  Matrix truth = gaussian(n, r, rng) * gaussian(r, n, rng);
  Vector y = op.apply(truth);
  return ProblemInstance(op, y, r, truth, true);
}

}  // namespace

TEST(LinearInterval, AtZero) {
  auto iv = linearConvergenceInterval(0.0);
  EXPECT_EQ(iv.lower, 5.0 / 12.0);
  EXPECT_EQ(iv.upper, 7.0 / 12.0);
  EXPECT_TRUE(iv.open);
  EXPECT_TRUE(iv.nonempty);
  EXPECT_FALSE(iv.contains(5.0 / 12.0));
  EXPECT_TRUE(iv.contains(0.5));
}

TEST(LinearInterval, DegeneratePoint) {
  auto iv = linearConvergenceInterval(1.0 / 71.0);
  EXPECT_NEAR(iv.lower, 71.0 / 144.0, 1e-12);
  EXPECT_NEAR(iv.upper, 71.0 / 144.0, 1e-12);
  EXPECT_FALSE(iv.nonempty);
  EXPECT_FALSE(iv.contains(71.0 / 144.0));
}

TEST(LinearInterval, EmptyPastThreshold) {
  for (double d : {1.0 / 71.0 + 1e-9, 0.02, 0.5, 0.9}) {
    auto iv = linearConvergenceInterval(d);
    EXPECT_FALSE(iv.nonempty) << d;
    EXPECT_FALSE(iv.contains(0.5));
  }
  EXPECT_TRUE(linearConvergenceInterval(1.0 / 71.0 - 1e-6).nonempty);
  EXPECT_TRUE(std::isnan(linearConvergenceInterval(0.5).lower));
}

TEST(LinearInterval, MatchesDirectFormula) {
  for (double d : {0.001, 0.005, 0.01, 0.014}) {
    double disc = 71 * d * d - 72 * d + 1;
    double lo = (6 - 6 * d - std::sqrt(disc)) / (12 - 12 * d * d);
    double hi = (6 - 6 * d + std::sqrt(disc)) / (12 - 12 * d * d);
    auto iv = linearConvergenceInterval(d);
    EXPECT_NEAR(iv.lower, lo, 1e-13);
    EXPECT_NEAR(iv.upper, hi, 1e-13);
  }
}

TEST(ObjectiveInterval, Examples) {
  auto z = objectiveContractionInterval(0.0);
  EXPECT_EQ(z.lower, 0.0);
  EXPECT_EQ(z.upper, 0.25);
  EXPECT_FALSE(z.open);
  EXPECT_TRUE(z.contains(0.0));
  EXPECT_TRUE(z.contains(0.25));

  double d = 0.05;
  double cubic = -68 * d * d * d - 388 * d * d - 60 * d + 4;
  EXPECT_NEAR(cubic, 0.0215, 1e-12);
  auto iv = objectiveContractionInterval(d);
  EXPECT_TRUE(iv.nonempty);
  double den = (16 * d * d + 96 * d + 16) * std::sqrt(1 - d);
  EXPECT_NEAR(iv.lower, (2 * (1 + d) * std::sqrt(1 - d) - std::sqrt(cubic)) / den, 1e-13);
  EXPECT_NEAR(iv.upper, (2 * (1 + d) * std::sqrt(1 - d) + std::sqrt(cubic)) / den, 1e-13);

  EXPECT_FALSE(objectiveContractionInterval(0.5).nonempty);
}

TEST(Constants, Examples) {
  auto a = convergenceConstants(0.0, 0.5, 10);
  EXPECT_EQ(a.rho, 0.0);
  ASSERT_TRUE(a.kappa);
  EXPECT_EQ(*a.kappa, 0.0);

  auto b = convergenceConstants(0.0, 0.125, 1);
  EXPECT_DOUBLE_EQ(b.mu, 7.0 / 8.0);
  EXPECT_EQ(b.nu, 0.0);
  ASSERT_TRUE(b.beta);
  EXPECT_DOUBLE_EQ(*b.beta, 7.0 / 8.0);
  EXPECT_TRUE(b.betaBelowOne());

  auto c = convergenceConstants(0.01, linearConvergenceInterval(0.01).at(0.5), 100);
  EXPECT_TRUE(c.kappaBelowOne());
}

TEST(Constants, MatchDirectFormulas) {
  const double d = 0.01, eta = 0.47;
  const int n = 7;
  auto c = convergenceConstants(d, eta, n);
  double rho = 2 * std::sqrt(1 - 2 * (1 - d) * (2 * eta - 2 * eta * eta * (1 + d)));
  EXPECT_NEAR(c.rho, rho, 1e-14);
  double kappa = (-3 * std::pow(rho, n + 1) + std::pow(rho, n) + 2 * rho) / (1 - rho);
  EXPECT_NEAR(*c.kappa, kappa, 1e-13);
  double mu = (1 + d) / (1 - d) - 2 * eta * (1 + d) * (1 - 4 * eta * (1 + d));
  EXPECT_NEAR(c.mu, mu, 1e-14);
  EXPECT_NEAR(c.nu, 32 * d * eta * eta, 1e-15);
  EXPECT_NEAR(*c.beta, std::pow(mu, n) + c.nu * (1 - std::pow(mu, n)) / (1 - mu), 1e-12);
}

TEST(Constants, DomainErrorsAndUndefinedValues) {
  EXPECT_THROW(convergenceConstants(-0.1, 0.5, 1), Error);
  EXPECT_THROW(convergenceConstants(1.0, 0.5, 1), Error);
  auto far = convergenceConstants(0.0, 0.05, 3);
  EXPECT_GE(far.rho, 1.0);
  EXPECT_FALSE(far.kappa.has_value());
  EXPECT_FALSE(far.kappaBelowOne());
  // mu == 1 at eta = 1/4 with delta = 0
  auto flat = convergenceConstants(0.0, 0.25, 3);
  EXPECT_NEAR(flat.mu, 1.0, 1e-15);
}

TEST(Constants, KappaBelowOneInsideLinearInterval) {
  for (double d : {0.0, 0.002, 0.005, 0.01, 0.013, 1.0 / 71.0 - 1e-6}) {
    auto iv = linearConvergenceInterval(d);
    ASSERT_TRUE(iv.nonempty);
    for (int i = 1; i <= 20; ++i) {
      double eta = iv.at(i / 21.0);
      for (int n : {1, 2, 10, 100, 1000}) {
        auto c = convergenceConstants(d, eta, n);
        EXPECT_LT(c.rho, 1.0) << d << " " << eta;
        EXPECT_TRUE(c.kappaBelowOne()) << d << " " << eta << " " << n;
      }
    }
  }
}

TEST(Constants, BetaBelowOneForLongInnerLoops) {
  int asserted = 0;
  for (double d : {0.0, 0.01, 0.02, 0.03, 0.04, 0.05}) {
    auto iv = objectiveContractionInterval(d);
    ASSERT_TRUE(iv.nonempty);
    for (int i = 1; i <= 20; ++i) {
      double eta = iv.at(i / 21.0);
      for (int n : {10, 100, 1000}) {
        auto c = convergenceConstants(d, eta, n);
        if (c.mu >= 1.0) continue;
        if (!(std::pow(c.mu, n) < 1.0 - c.nu / (1.0 - c.mu))) continue;
        ++asserted;
        EXPECT_TRUE(c.betaBelowOne()) << d << " " << eta << " " << n;
      }
    }
  }
  EXPECT_GT(asserted, 100);
}

TEST(Constants, MonotoneInDelta) {
  const double eta = 0.45;
  double prevRho = -1, prevMu = -1;
  for (double d = 0.0; d <= 0.014; d += 0.001) {
    auto c = convergenceConstants(d, eta, 10);
    EXPECT_GE(c.rho, prevRho);
    EXPECT_GE(c.mu, prevMu);
    prevRho = c.rho;
    prevMu = c.mu;
  }
}

TEST(Complexity, Examples) {
  auto done = complexityEstimate(100, 10, 1, 2, 1.0, 0.5, 0.5);
  ASSERT_TRUE(done.guaranteed());
  EXPECT_EQ(*done.outerLoops, 0);

  auto ten = complexityEstimate(100, 10, 1, 2, std::ldexp(1.0, -10), 0.5, 1.0);
  EXPECT_EQ(*ten.outerLoops, 10);
  EXPECT_LE(std::pow(0.5, *ten.outerLoops), std::ldexp(1.0, -10));

  auto cost = complexityEstimate(1000, 1000, 1, 5, 1e-3, 0.5);
  EXPECT_DOUBLE_EQ(cost.perOuterCost(), 2125.0);
  EXPECT_DOUBLE_EQ(cost.fullGradientCost, 1000.0);
  EXPECT_DOUBLE_EQ(cost.innerGradientCost, 1000.0);
  EXPECT_DOUBLE_EQ(cost.projectionCost, 125.0);

  EXPECT_FALSE(complexityEstimate(1000, 1000, 1, 5, 1e-3, 1.0).guaranteed());
  EXPECT_FALSE(complexityEstimate(1000, 1000, 1, 5, 1e-3, 1.5).guaranteed());
}

TEST(Complexity, SmallestSufficientCount) {
  for (double beta : {0.1, 0.37, 0.9, 0.999}) {
    for (double eps : {1e-2, 1e-6, 1e-12}) {
      auto e = complexityEstimate(10, 10, 1, 1, eps, beta);
      ASSERT_TRUE(e.guaranteed());
      std::int64_t k = *e.outerLoops;
      EXPECT_LE(std::pow(beta, static_cast<double>(k)), eps * (1 + 1e-12));
      EXPECT_GT(std::pow(beta, static_cast<double>(k - 1)), eps);
    }
  }
}

TEST(LemmaChecker, RequiresTruth) {
  auto inst = gaussianEnsemble(4, 1, 20, 1);
  ProblemInstance bare(inst.op, inst.y, 1);
  try {
    lemmaChecker(bare, 5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(LemmaChecker, HundredTrialsNoViolations) {
  auto inst = gaussianEnsemble(12, 2, 200, 2024);
  auto rep = lemmaChecker(inst, 100, 7);
  EXPECT_EQ(rep.trials, 100);
  EXPECT_EQ(rep.gatedViolations(), 0);
  EXPECT_LE(rep.worstIdentityRelError, 1e-10);
  for (const auto* s : rep.all()) {
    EXPECT_GT(s->checked, 0) << s->name;
    if (s != &rep.gradientDominanceProof) EXPECT_GE(s->worstMargin, -1e-9) << s->name;
  }
}

TEST(LemmaChecker, DeterministicInSeed) {
  auto inst = gaussianEnsemble(6, 1, 60, 3);
  auto a = lemmaChecker(inst, 20, 5);
  auto b = lemmaChecker(inst, 20, 5);
  EXPECT_EQ(a.worstIdentityRelError, b.worstIdentityRelError);
  EXPECT_EQ(a.directionVariance.worstMargin, b.directionVariance.worstMargin);
}
