#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/operators.hpp"

namespace lowrank::theory {

/// Admissible step interval. Open intervals are nonempty iff lower < upper,
/// closed ones iff lower <= upper. Past the existence threshold both
/// endpoints are NaN.
struct StepInterval {
  double lower;
  double upper;
  bool open;
  bool nonempty;

  bool contains(double eta) const;
  double at(double placement) const { return lower + placement * (upper - lower); }
};

/// Open interval (6-6d -+ sqrt((71d-1)(d-1))) / (12-12d^2) on which the
/// per-inner-step contraction of the iterate error stays below 1/3. Nonempty
/// iff d < 1/71.
StepInterval linearConvergenceInterval(double delta);

/// Closed interval (2(1+d)sqrt(1-d) -+ sqrt(-68d^3-388d^2-60d+4)) /
/// ((16d^2+96d+16) sqrt(1-d)) for the objective-gap contraction. Nonempty
/// iff the cubic is nonnegative.
StepInterval objectiveContractionInterval(double delta);

struct TheoryConstants {
  double delta;
  double eta;
  int innerN;
  double rho;
  /// Undefined (nullopt) when rho >= 1.
  std::optional<double> kappa;
  double mu;
  double nu;
  /// Undefined when mu == 1.
  std::optional<double> beta;

  bool kappaBelowOne() const { return kappa && *kappa < 1.0; }
  bool betaBelowOne() const { return beta && *beta < 1.0; }
};

/// rho = 2 sqrt(1 - 2(1-d)(2 eta - 2 eta^2 (1+d))),
/// kappa = (-3 rho^{n+1} + rho^n + 2 rho) / (1 - rho),
/// mu = (1+d)/(1-d) - 2 eta (1+d)(1 - 4 eta (1+d)), nu = 32 d eta^2,
/// beta = mu^n + nu (1 - mu^n) / (1 - mu).
/// Throws ErrorKind::Domain on a negative radicand or delta outside [0, 1).
TheoryConstants convergenceConstants(double delta, double eta, int innerN);

struct ComplexityEstimate {
  /// Outer loops until beta^k * gap <= epsilon; nullopt without a guarantee.
  std::optional<std::int64_t> outerLoops;
  double fullGradientCost;   // m
  double innerGradientCost;  // n * b
  double projectionCost;     // r^3
  double perOuterCost() const { return fullGradientCost + innerGradientCost + projectionCost; }
  bool guaranteed() const { return outerLoops.has_value(); }
};

/// Per-outer cost m + n b + r^3 and the outer-loop count for contraction
/// factor beta from an initial objective gap down to epsilon.
ComplexityEstimate complexityEstimate(double m, double innerN, double maxBatch, double r,
                                      double epsilon, double beta, double initialGap = 1.0);

struct InequalityStats {
  std::string name;
  int checked = 0;
  int violations = 0;
  /// min over trials of (rhs - lhs) / scale; >= 0 means the bound held.
  double worstMargin = 0.0;
};

struct LemmaReport {
  int trials = 0;
  InequalityStats gradientIdentity;      // <X-Y, dF> = (2/m)|A(X-Y)|^2
  InequalityStats strongMonotonicity;    // lower bound on <X-Y, dF>
  InequalityStats cocoercivity;          // batch gradients
  InequalityStats fullContraction;       // full-gradient step on span{X,Y}
  InequalityStats stochasticContraction; // expectation over singletons
  InequalityStats gradientVariance;      // E|P(df_i(X) - df_i(X*))|^2
  InequalityStats directionVariance;     // E|P(V_t)|^2
  /// Gradient-dominance bound as stated (2(1-d)/(1+d) constant); the form
  /// with 4(1-d)^2/(1+d) is tracked separately.
  InequalityStats gradientDominanceStated;
  InequalityStats gradientDominanceProof;
  double worstIdentityRelError = 0.0;

  std::vector<const InequalityStats*> all() const;
  /// Violations across the checks that gate acceptance.
  int gatedViolations() const;
};

/// Draws random rank-r pairs and checks the lemma inequalities with exact
/// per-subspace restricted isometry constants. Requires inst.truth and a
/// noiseless instance. Throws ErrorKind::InvalidInput otherwise.
LemmaReport lemmaChecker(const ProblemInstance& inst, int trials, std::uint64_t seed);

}  // namespace lowrank::theory
