#include "lowrank/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lowrank/error.hpp"
#include "lowrank/random.hpp"

namespace lowrank::theory {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void checkDelta(double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) fail(ErrorKind::Domain, "delta must lie in [0, 1)");
}

}  // namespace

bool StepInterval::contains(double eta) const {
  if (!nonempty) return false;
  return open ? (eta > lower && eta < upper) : (eta >= lower && eta <= upper);
}

StepInterval linearConvergenceInterval(double delta) {
  checkDelta(delta);
  using Real = long double;
  const Real d = delta;
  const Real root = 71.0L * d - 1.0L;
  Real disc = root * (d - 1.0L);
  // The double nearest 1/71 leaves a rounding residue in 71d - 1.
  if (std::fabs(root) <= 4.0L * std::numeric_limits<double>::epsilon()) disc = 0.0L;
  StepInterval iv{kNaN, kNaN, true, false};
  if (disc < 0.0L) return iv;
  const Real s = std::sqrt(disc);
  const Real den = 12.0L - 12.0L * d * d;
  iv.lower = static_cast<double>((6.0L - 6.0L * d - s) / den);
  iv.upper = static_cast<double>((6.0L - 6.0L * d + s) / den);
  iv.nonempty = iv.lower < iv.upper;
  return iv;
}

StepInterval objectiveContractionInterval(double delta) {
  checkDelta(delta);
  using Real = long double;
  const Real d = delta;
  const Real cubic = -68.0L * d * d * d - 388.0L * d * d - 60.0L * d + 4.0L;
  StepInterval iv{kNaN, kNaN, false, false};
  if (cubic < 0.0L) return iv;
  const Real sq = std::sqrt(1.0L - d);
  const Real s = std::sqrt(cubic);
  const Real den = (16.0L * d * d + 96.0L * d + 16.0L) * sq;
  const Real mid = 2.0L * (1.0L + d) * sq;
  iv.lower = static_cast<double>((mid - s) / den);
  iv.upper = static_cast<double>((mid + s) / den);
  iv.nonempty = iv.lower <= iv.upper;
  return iv;
}

TheoryConstants convergenceConstants(double delta, double eta, int innerN) {
  checkDelta(delta);
  if (!(eta > 0.0) || !std::isfinite(eta)) fail(ErrorKind::Domain, "eta must be positive");
  if (innerN < 1) fail(ErrorKind::Domain, "inner loop length must be >= 1");
  TheoryConstants c{};
  c.delta = delta;
  c.eta = eta;
  c.innerN = innerN;
  const double n = innerN;

  double rad = 1.0 - 2.0 * (1.0 - delta) * (2.0 * eta - 2.0 * eta * eta * (1.0 + delta));
  if (rad < 0.0 && rad > -1e-14) rad = 0.0;
  if (rad < 0.0) fail(ErrorKind::Domain, "negative radicand in the contraction factor");
  c.rho = 2.0 * std::sqrt(rad);
  if (c.rho < 1.0) {
    const double rn = std::pow(c.rho, n);
    c.kappa = (rn * (1.0 - 3.0 * c.rho) + 2.0 * c.rho) / (1.0 - c.rho);
  }

  c.mu = (1.0 + delta) / (1.0 - delta) -
         2.0 * eta * (1.0 + delta) * (1.0 - 4.0 * eta * (1.0 + delta));
  c.nu = 32.0 * delta * eta * eta;
  if (c.mu != 1.0) {
    const double mn = std::pow(c.mu, n);
    c.beta = mn + c.nu * (1.0 - mn) / (1.0 - c.mu);
  }
  return c;
}

ComplexityEstimate complexityEstimate(double m, double innerN, double maxBatch, double r,
                                      double epsilon, double beta, double initialGap) {
  for (double v : {m, innerN, maxBatch, r, epsilon})
    if (!(v > 0.0) || !std::isfinite(v))
      fail(ErrorKind::InvalidInput, "complexity inputs must be positive and finite");
  if (!(initialGap >= 0.0)) fail(ErrorKind::InvalidInput, "initial gap must be >= 0");
  ComplexityEstimate e;
  e.fullGradientCost = m;
  e.innerGradientCost = innerN * maxBatch;
  e.projectionCost = r * r * r;
  if (initialGap <= epsilon) {
    e.outerLoops = 0;
    return e;
  }
  if (!(beta >= 0.0 && beta < 1.0)) return e;
  if (beta == 0.0) {
    e.outerLoops = 1;
    return e;
  }
  auto reached = [&](std::int64_t k) {
    return std::pow(beta, static_cast<double>(k)) * initialGap <= epsilon;
  };
  auto k = static_cast<std::int64_t>(std::ceil(std::log(initialGap / epsilon) / -std::log(beta)));
  k = std::max<std::int64_t>(k, 1);
  while (k > 1 && reached(k - 1)) --k;
  while (!reached(k)) ++k;
  e.outerLoops = k;
  return e;
}

std::vector<const InequalityStats*> LemmaReport::all() const {
  return {&gradientIdentity,      &strongMonotonicity,      &cocoercivity,
          &fullContraction,       &stochasticContraction,   &gradientVariance,
          &directionVariance,     &gradientDominanceStated, &gradientDominanceProof};
}

int LemmaReport::gatedViolations() const {
  int v = 0;
  for (const auto* s : all()) v += s->violations;
  return v;
}

namespace {

/// Records lhs <= rhs with a relative floating slack.
void check(InequalityStats& s, double lhs, double rhs) {
  const double scale = std::max({std::fabs(lhs), std::fabs(rhs), 1e-300});
  const double margin = (rhs - lhs) / scale;
  if (s.checked == 0 || margin < s.worstMargin) s.worstMargin = margin;
  ++s.checked;
  if (margin < -1e-9) ++s.violations;
}

struct SubspaceConstants {
  SubspaceProjector projector;
  RipBounds full;
  /// max_l |P A_l|^2, the upper constant of every singleton batch.
  double singletonUpper = 0.0;
};

SubspaceConstants constantsOn(const MeasurementOp& op, std::initializer_list<Matrix> mats) {
  SubspaceConstants c{SubspaceProjector::spanOf(mats), {0.0, 0.0}, 0.0};
  if (c.projector.empty()) return c;
  c.full = estimateSubspaceRip(op, c.projector);
  for (Index l = 0; l < op.measurementCount(); ++l)
    c.singletonUpper = std::max(
        c.singletonUpper, estimateSubspaceRip(op, c.projector, IndexBatch::single(l)).upper);
  return c;
}

Matrix randomLowRank(Index rows, Index cols, Index r, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix a(rows, r), b(r, cols);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = normal(rng);
  std::uniform_real_distribution<double> mag(0.1, 2.0);
  return mag(rng) * (a * b) / std::sqrt(static_cast<double>(r * rows * cols));
}

}  // namespace

LemmaReport lemmaChecker(const ProblemInstance& inst, int trials, std::uint64_t seed) {
  if (!inst.truth) fail(ErrorKind::InvalidInput, "lemmaChecker: instance has no ground truth");
  if (!inst.noiseless) fail(ErrorKind::InvalidInput, "lemmaChecker: instance must be noiseless");
  if (trials < 0) fail(ErrorKind::InvalidInput, "lemmaChecker: negative trial count");

  LemmaReport rep;
  rep.trials = trials;
  rep.gradientIdentity.name = "gradient identity";
  rep.strongMonotonicity.name = "strong monotonicity";
  rep.cocoercivity.name = "co-coercivity";
  rep.fullContraction.name = "full-gradient contraction";
  rep.stochasticContraction.name = "stochastic contraction";
  rep.gradientVariance.name = "gradient variance";
  rep.directionVariance.name = "direction variance";
  rep.gradientDominanceStated.name = "gradient dominance (stated constant)";
  rep.gradientDominanceProof.name = "gradient dominance (proof constant)";

  const MeasurementOp& op = inst.op;
  const Matrix& xstar = *inst.truth;
  const Index rows = op.rows(), cols = op.cols(), r = inst.rankBudget;
  const Index m = inst.m();
  const double md = static_cast<double>(m);
  const double fstar = objective(inst, xstar);

  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(deriveSeed(seed, {static_cast<std::uint64_t>(trial)}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Matrix x = randomLowRank(rows, cols, r, rng);
    // A few trials pin Y = X so the equality cases are exercised too.
    const Matrix y = trial % 50 == 0 ? x : randomLowRank(rows, cols, r, rng);
    const Matrix d = x - y;
    const double dd = d.squaredNorm();

    const Matrix gx = fullGradient(inst, x);
    const Matrix gy = fullGradient(inst, y);
    const double lhs1 = inner(d, gx - gy);
    const double rhs1 = 2.0 / md * applyOp(op, d).squaredNorm();
    const double idErr = std::fabs(lhs1 - rhs1) / std::max(std::fabs(rhs1), 1e-300);
    rep.worstIdentityRelError = std::max(rep.worstIdentityRelError, dd == 0.0 ? 0.0 : idErr);
    check(rep.gradientIdentity, std::fabs(lhs1 - rhs1), 1e-10 * std::fabs(rhs1));

    const SubspaceConstants gamma = constantsOn(op, {x, y});
    const double lmin = gamma.full.lower, lmax = gamma.full.upper;
    check(rep.strongMonotonicity, 2.0 * lmin * dd, lhs1);

    // Co-coercivity on a random batch.
    {
      std::uniform_int_distribution<Index> size(1, m);
      BatchSampler sampler(m, size(rng), rng());
      const IndexBatch batch = sampler.next();
      const Matrix diff =
          stochasticGradient(inst, x, batch) - stochasticGradient(inst, y, batch);
      const double upper = gamma.projector.empty()
                               ? 0.0
                               : estimateSubspaceRip(op, gamma.projector, batch).upper;
      check(rep.cocoercivity, gamma.projector.project(diff).squaredNorm(),
            2.0 * upper * inner(d, diff));
    }

    // Full-gradient contraction for eta in (0, 1/lmax].
    if (lmax > 0.0) {
      const double eta = (1.0 - unit(rng)) / lmax;
      const double rad = 1.0 - 2.0 * lmin * (2.0 * eta - 2.0 * eta * eta * lmax);
      if (rad >= 0.0) {
        const Matrix step = d - eta * gamma.projector.project(gx - gy);
        check(rep.fullContraction, step.norm(), std::sqrt(rad) * std::sqrt(dd));
      }
    }

    // Expected contraction over all singleton batches, eta in (0, 1/u].
    if (gamma.singletonUpper > 0.0) {
      const double u = gamma.singletonUpper;
      const double eta = (1.0 - unit(rng)) / u;
      const double rad = 1.0 - 2.0 * lmin * (2.0 * eta - 2.0 * eta * eta * u);
      if (rad >= 0.0) {
        double mean = 0.0;
        for (Index l = 0; l < m; ++l) {
          const IndexBatch b = IndexBatch::single(l);
          const Matrix diff = stochasticGradient(inst, x, b) - stochasticGradient(inst, y, b);
          mean += (d - eta * gamma.projector.project(diff)).squaredNorm();
        }
        check(rep.stochasticContraction, mean / md, rad * dd);
      }
    }

    // Variance and dominance bounds around the truth.
    {
      const SubspaceConstants lam = constantsOn(op, {x, xstar});
      const double gap = objective(inst, x) - fstar;
      double var = 0.0;
      for (Index l = 0; l < m; ++l) {
        const IndexBatch b = IndexBatch::single(l);
        var += lam.projector
                   .project(stochasticGradient(inst, x, b) - stochasticGradient(inst, xstar, b))
                   .squaredNorm();
      }
      check(rep.gradientVariance, var / md, 4.0 * lam.singletonUpper * gap);

      if (lam.full.upper > 0.0) {
        const double pg = lam.projector.project(gx).squaredNorm();
        const double lo = lam.full.lower, hi = lam.full.upper;
        check(rep.gradientDominanceStated, 2.0 * lo / hi * gap, pg);
        check(rep.gradientDominanceProof, 4.0 * lo * lo / hi * gap, pg);
      }
    }

    // Variance-reduced direction with y as the snapshot.
    {
      const Matrix& snap = y;
      const SubspaceConstants om = constantsOn(op, {snap, x, xstar});
      const double u = om.singletonUpper;
      const double lo = om.full.lower, hi = om.full.upper;
      double var = 0.0;
      for (Index l = 0; l < m; ++l)
        var += om.projector
                   .project(varianceReducedDirection(inst, x, snap, gy, IndexBatch::single(l)))
                   .squaredNorm();
      const double snapCoef = hi > 0.0 ? 8.0 * u - 8.0 * lo * lo / hi : 0.0;
      check(rep.directionVariance, var / md,
            8.0 * u * (objective(inst, x) - fstar) + snapCoef * (objective(inst, snap) - fstar));
    }
  }
  return rep;
}

}  // namespace lowrank::theory
