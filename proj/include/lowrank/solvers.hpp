#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lowrank/linalg.hpp"
#include "lowrank/operators.hpp"

namespace lowrank {

struct FixedStep {
  double eta;
};

/// Barzilai-Borwein step on successive snapshots, eta_k =
/// |S|^2 / (n <S, G>) with S, G the snapshot and full-gradient differences.
/// `fallback` <= 0 selects the automatic first step (see resolveInitialStep).
struct BarzilaiBorweinStep {
  double fallback = 0.0;
  double clampMin = 1e-6;
  double clampMax = 1e2;
};

/// Fixed step placed inside the linear-convergence interval for an assumed
/// restricted isometry constant: eta = lower + placement * (upper - lower).
struct TheoryGuidedStep {
  double delta;
  double placement = 0.5;
};

using StepRule = std::variant<FixedStep, BarzilaiBorweinStep, TheoryGuidedStep>;

std::string describe(const StepRule& rule);

enum class InitKind { Zero, SpectralOneStep };

struct SolverConfig {
  int outerIterations = 100;
  /// Inner steps per outer iteration; 0 selects m.
  int innerIterations = 0;
  double tolerance = 1e-8;
  StepRule step = BarzilaiBorweinStep{};
  Index batchSize = 1;
  std::uint64_t rngSeed = 0;
  InitKind init = InitKind::Zero;

  /// Throws ErrorKind::Configuration.
  void validate(Index m) const;
  int innerFor(Index m) const { return innerIterations == 0 ? static_cast<int>(m) : innerIterations; }
};

struct TraceRow {
  int iteration = 0;
  /// |y - A(X_k)|^2
  double residual = 0.0;
  double objective = 0.0;
  std::optional<double> relativeError;
  double step = 0.0;
  double wallSeconds = 0.0;
  /// Measurement functionals evaluated for gradients so far.
  std::uint64_t gradientEvaluations = 0;
  Index rank = 0;
};

struct SolveTrace {
  std::vector<TraceRow> rows;
  const TraceRow& last() const { return rows.back(); }
};

enum class Termination { ResidualTol, IterateTol, Budget };
const char* to_string(Termination t) noexcept;

struct RecoveryResult {
  Matrix estimate;
  SolveTrace trace;
  Termination terminated = Termination::Budget;
};

struct BbOptions {
  double fallback;
  double clampMin = 1e-6;
  double clampMax = 1e2;
};

/// eta = |S|^2 / (n <S, G>), S = snapshot - prevSnapshot, G = grad - prevGrad.
/// Nonpositive curvature returns the fallback (clamped); a quotient outside
/// [clampMin, clampMax] is clamped. Identical snapshots throw
/// ErrorKind::DegenerateStep.
double bbStep(const Matrix& prevSnapshot, const Matrix& snapshot, const Matrix& prevGrad,
              const Matrix& grad, int n, const BbOptions& opts);

/// Restricted steepest-descent step |P_U g|^2 / ((2/m)|A(P_U g)|^2), U the
/// leading-r column space of x (of g when x is zero). Returns 0 when the
/// denominator underflows.
double nihtStepSize(const ProblemInstance& inst, const Matrix& x, const Matrix& grad);

/// 1 / (2 * upper restricted isometry estimate) on a random rank-r probe.
double probeStep(const ProblemInstance& inst, std::uint64_t seed);

/// Stochastic variance-reduced gradient with rank-r hard thresholding.
RecoveryResult svrgArm(const ProblemInstance& inst, const SolverConfig& cfg);
/// Projected full-gradient descent, X <- H_r(X - eta grad F(X)).
RecoveryResult svp(const ProblemInstance& inst, const SolverConfig& cfg);
/// SVP with the restricted steepest-descent step.
RecoveryResult niht(const ProblemInstance& inst, const SolverConfig& cfg);
/// Projected minibatch stochastic gradient; stopping checked every n steps.
RecoveryResult stoiht(const ProblemInstance& inst, const SolverConfig& cfg);

struct SvtParams {
  /// <= 0 selects 5 sqrt(n1 n2).
  double tau = 0.0;
  /// <= 0 selects 1.2 / rho with rho = m / (n1 n2).
  double stepDelta = 0.0;
  /// Start the dual variable at the first multiple of the back-projected data
  /// whose spectral norm reaches tau.
  bool kick = true;
};

/// Singular value thresholding: X_k = S_tau(Y_{k-1}),
/// Y_k = Y_{k-1} + delta * A^T(y - A(X_k)) / mean|A_l|^2.
RecoveryResult svt(const ProblemInstance& inst, const SolverConfig& cfg, const SvtParams& params);

enum class SolverKind { SvrgArm, Svp, Niht, StoIht, Svt };
const char* to_string(SolverKind k) noexcept;
SolverKind parseSolverKind(const std::string& name);

RecoveryResult runSolver(SolverKind kind, const ProblemInstance& inst, const SolverConfig& cfg,
                         const SvtParams& svtParams = {});

}  // namespace lowrank
