#include "lowrank/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "lowrank/error.hpp"
#include "lowrank/random.hpp"
#include "lowrank/theory.hpp"

namespace lowrank {

namespace {

using Clock = std::chrono::steady_clock;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

/// Bookkeeping shared by all solvers.
class Recorder {
 public:
  explicit Recorder(const ProblemInstance& inst) : inst_(inst), start_(Clock::now()) {
    if (inst.truth) truthNorm_ = inst.truth->norm();
  }

  void addEvaluations(std::uint64_t n) { evals_ += n; }

  const TraceRow& record(int iteration, const Matrix& x, double residual, double step,
                         Index rank) {
    TraceRow row;
    row.iteration = iteration;
    row.residual = residual;
    row.objective = residual / static_cast<double>(inst_.m());
    if (inst_.truth) {
      const double err = (x - *inst_.truth).norm();
      row.relativeError = truthNorm_ > 0.0 ? err / truthNorm_ : err;
    }
    row.step = step;
    row.wallSeconds = std::chrono::duration<double>(Clock::now() - start_).count();
    row.gradientEvaluations = evals_;
    row.rank = rank;
    trace_.rows.push_back(row);
    return trace_.rows.back();
  }

  RecoveryResult finish(Matrix estimate, Termination t) {
    return {std::move(estimate), std::move(trace_), t};
  }

 private:
  const ProblemInstance& inst_;
  Clock::time_point start_;
  double truthNorm_ = 0.0;
  std::uint64_t evals_ = 0;
  SolveTrace trace_;
};

void checkFinite(const Matrix& x, int iteration, const char* solver) {
  if (!x.allFinite()) {
    std::ostringstream os;
    os << solver << ": non-finite iterate at outer iteration " << iteration;
    fail(ErrorKind::Divergence, os.str());
  }
}

void checkFinite(double v, int iteration, const char* solver) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << solver << ": non-finite residual at outer iteration " << iteration;
    fail(ErrorKind::Divergence, os.str());
  }
}

Index rankOf(const SvdFactors& f) {
  if (f.singular.size() == 0 || f.singular(0) == 0.0) return 0;
  return (f.singular.array() > 1e-8 * f.singular(0)).count();
}

struct Projection {
  Matrix x;
  SvdFactors factors;
};

Projection project(const Matrix& w, Index rank) {
  Projection p;
  p.factors = truncatedSvd(w, rank);
  p.x = p.factors.left * p.factors.singular.asDiagonal() * p.factors.right.transpose();
  return p;
}

Matrix initialIterate(const ProblemInstance& inst, const SolverConfig& cfg) {
  if (cfg.init == InitKind::Zero) return Matrix::Zero(inst.op.rows(), inst.op.cols());
  const double eta0 = probeStep(inst, deriveSeed(cfg.rngSeed, {0x1417}));
  const Matrix g0 = fullGradient(inst, Matrix::Zero(inst.op.rows(), inst.op.cols()));
  return hardThresholdRank(-eta0 * g0, inst.rankBudget);
}

/// First-iteration step for a rule; `innerN` rescales the automatic BB
/// fallback so that one outer loop moves about one full-gradient step.
double resolveInitialStep(const StepRule& rule, const ProblemInstance& inst,
                          const SolverConfig& cfg, int innerN) {
  return std::visit(
      Overloaded{
          [](const FixedStep& s) { return s.eta; },
          [&](const BarzilaiBorweinStep& s) {
            if (s.fallback > 0.0) return s.fallback;
            const double eta = probeStep(inst, deriveSeed(cfg.rngSeed, {0xb0b0})) / innerN;
            return std::clamp(eta, s.clampMin, s.clampMax);
          },
          [](const TheoryGuidedStep& s) {
            const auto iv = theory::linearConvergenceInterval(s.delta);
            if (!iv.nonempty)
              fail(ErrorKind::Configuration,
                   "theory-guided step: empty admissible interval for delta");
            return iv.at(s.placement);
          },
      },
      rule);
}

/// Step selection across outer iterations.
class StepSchedule {
 public:
  StepSchedule(const StepRule& rule, const ProblemInstance& inst, const SolverConfig& cfg,
               int innerN)
      : rule_(rule), innerN_(innerN), eta_(resolveInitialStep(rule, inst, cfg, innerN)) {
    if (const auto* bb = std::get_if<BarzilaiBorweinStep>(&rule_))
      bb_ = BbOptions{eta_, bb->clampMin, bb->clampMax};
  }

  double next(const Matrix& snapshot, const Matrix& grad) {
    if (bb_ && havePrev_) {
      try {
        eta_ = bbStep(prevSnapshot_, snapshot, prevGrad_, grad, innerN_, *bb_);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateStep) throw;
      }
    }
    if (bb_) {
      prevSnapshot_ = snapshot;
      prevGrad_ = grad;
      havePrev_ = true;
    }
    return eta_;
  }

 private:
  StepRule rule_;
  int innerN_;
  double eta_;
  std::optional<BbOptions> bb_;
  bool havePrev_ = false;
  Matrix prevSnapshot_;
  Matrix prevGrad_;
};

}  // namespace

std::string describe(const StepRule& rule) {
  std::ostringstream os;
  os.precision(17);
  std::visit(Overloaded{
                 [&](const FixedStep& s) { os << "fixed(" << s.eta << ")"; },
                 [&](const BarzilaiBorweinStep& s) {
                   os << "bb(fallback=" << s.fallback << ",clamp=[" << s.clampMin << ","
                      << s.clampMax << "])";
                 },
                 [&](const TheoryGuidedStep& s) {
                   os << "theory(delta=" << s.delta << ",placement=" << s.placement << ")";
                 },
             },
             rule);
  return os.str();
}

const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::ResidualTol: return "residual-tol";
    case Termination::IterateTol: return "iterate-tol";
    case Termination::Budget: return "budget";
  }
  return "unknown";
}

void SolverConfig::validate(Index m) const {
  auto bad = [](const std::string& what) { fail(ErrorKind::Configuration, what); };
  if (outerIterations < 1) bad("outer iterations must be >= 1");
  if (innerIterations < 0) bad("inner iterations must be >= 1 (0 selects m)");
  if (!(tolerance > 0.0)) bad("tolerance must be > 0");
  if (batchSize < 1 || batchSize > m) bad("batch size must lie in [1, m]");
  std::visit(Overloaded{
                 [&](const FixedStep& s) {
                   if (!(s.eta > 0.0) || !std::isfinite(s.eta)) bad("fixed step must be > 0");
                 },
                 [&](const BarzilaiBorweinStep& s) {
                   if (!(s.clampMin > 0.0) || !(s.clampMax > 0.0) || s.clampMin > s.clampMax)
                     bad("bb clamp bounds must be positive and ordered");
                   if (s.fallback < 0.0) bad("bb fallback must be >= 0");
                 },
                 [&](const TheoryGuidedStep& s) {
                   if (!(s.delta >= 0.0 && s.delta < 1.0)) bad("theory delta must lie in [0, 1)");
                   if (!(s.placement >= 0.0 && s.placement <= 1.0))
                     bad("theory placement must lie in [0, 1]");
                 },
             },
             step);
}

double bbStep(const Matrix& prevSnapshot, const Matrix& snapshot, const Matrix& prevGrad,
              const Matrix& grad, int n, const BbOptions& opts) {
  const Matrix s = snapshot - prevSnapshot;
  const double ss = s.squaredNorm();
  if (ss == 0.0) fail(ErrorKind::DegenerateStep, "bbStep: identical snapshots");
  const double curvature = inner(s, grad - prevGrad);
  if (!(curvature > 0.0)) return std::clamp(opts.fallback, opts.clampMin, opts.clampMax);
  const double eta = ss / (static_cast<double>(n) * curvature);
  if (!std::isfinite(eta)) return std::clamp(opts.fallback, opts.clampMin, opts.clampMax);
  return std::clamp(eta, opts.clampMin, opts.clampMax);
}

double nihtStepSize(const ProblemInstance& inst, const Matrix& x, const Matrix& grad) {
  const Index r = inst.rankBudget;
  const bool zero = x.squaredNorm() == 0.0;
  const SvdFactors f = truncatedSvd(zero ? grad : x, r);
  const Matrix& u = f.left;
  const Matrix projected = u * (u.transpose() * grad);
  const double num = projected.squaredNorm();
  const double den = 2.0 / static_cast<double>(inst.m()) * applyOp(inst.op, projected).squaredNorm();
  if (!(den > std::numeric_limits<double>::min()) || !(num > 0.0)) return 0.0;
  return num / den;
}

double probeStep(const ProblemInstance& inst, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const Index r = inst.rankBudget;
  Matrix a(inst.op.rows(), r), b(r, inst.op.cols());
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = normal(rng);
  const Matrix probe = a * b;
  const double quotient = applyOp(inst.op, probe).squaredNorm() /
                          (static_cast<double>(inst.m()) * probe.squaredNorm());
  if (!(quotient > 0.0)) return 0.5;
  return 1.0 / (2.0 * quotient);
}

RecoveryResult svrgArm(const ProblemInstance& inst, const SolverConfig& cfg) {
  cfg.validate(inst.m());
  const Index r = inst.rankBudget;
  const auto m = static_cast<std::uint64_t>(inst.m());
  const int innerN = cfg.innerFor(inst.m());
  Recorder rec(inst);
  StepSchedule steps(cfg.step, inst, cfg, innerN);
  BatchSampler sampler(inst.m(), cfg.batchSize, deriveSeed(cfg.rngSeed, {0x5a3d}));

  Matrix snapshot = initialIterate(inst, cfg);
  // Residual at the snapshot feeds both the full gradient and, cached, every
  // anchor gradient of the inner loop.
  Vector snapResidual = applyOp(inst.op, snapshot) - inst.y;
  rec.addEvaluations(m);
  double res = snapResidual.squaredNorm();
  checkFinite(res, 0, "svrg-arm");
  rec.record(0, snapshot, res, 0.0, numericalRank(snapshot));
  if (res <= cfg.tolerance) return rec.finish(snapshot, Termination::ResidualTol);

  for (int k = 0; k < cfg.outerIterations; ++k) {
    const Matrix gk = gradientFromResidual(inst, snapResidual);
    const double eta = steps.next(snapshot, gk);
    Matrix x = snapshot;
    Index rank = 0;
    for (int t = 0; t < innerN; ++t) {
      const IndexBatch batch = sampler.next();
      const Matrix current = stochasticGradient(inst, x, batch);
      const Matrix anchor = stochasticGradientFromResidual(inst, snapResidual, batch);
      rec.addEvaluations(batch.size());
      const Matrix direction = current - (anchor - gk);
      const Matrix w = x - eta * direction;
      checkFinite(w, k + 1, "svrg-arm");
      Projection p = project(w, r);
      x = std::move(p.x);
      rank = rankOf(p.factors);
    }
    checkFinite(x, k + 1, "svrg-arm");
    Vector nextResidual = applyOp(inst.op, x) - inst.y;
    rec.addEvaluations(m);
    res = nextResidual.squaredNorm();
    checkFinite(res, k + 1, "svrg-arm");
    rec.record(k + 1, x, res, eta, rank);
    const double moved = (x - snapshot).squaredNorm();
    snapshot = std::move(x);
    snapResidual = std::move(nextResidual);
    if (res <= cfg.tolerance) return rec.finish(snapshot, Termination::ResidualTol);
    if (moved <= cfg.tolerance) return rec.finish(snapshot, Termination::IterateTol);
  }
  return rec.finish(snapshot, Termination::Budget);
}

namespace {

enum class FullStepKind { Svp, Niht };

RecoveryResult fullGradientIht(const ProblemInstance& inst, const SolverConfig& cfg,
                               FullStepKind kind) {
  cfg.validate(inst.m());
  const char* name = kind == FullStepKind::Svp ? "svp" : "niht";
  const Index r = inst.rankBudget;
  const auto m = static_cast<std::uint64_t>(inst.m());
  Recorder rec(inst);
  StepSchedule steps(cfg.step, inst, cfg, 1);

  Matrix x = initialIterate(inst, cfg);
  Vector residual = applyOp(inst.op, x) - inst.y;
  rec.addEvaluations(m);
  double res = residual.squaredNorm();
  checkFinite(res, 0, name);
  rec.record(0, x, res, 0.0, numericalRank(x));
  if (res <= cfg.tolerance) return rec.finish(x, Termination::ResidualTol);

  for (int k = 0; k < cfg.outerIterations; ++k) {
    const Matrix g = gradientFromResidual(inst, residual);
    double eta = steps.next(x, g);
    if (kind == FullStepKind::Niht) {
      const double adaptive = nihtStepSize(inst, x, g);
      rec.addEvaluations(m);
      if (adaptive > 0.0 && std::isfinite(adaptive)) eta = adaptive;
    }
    const Matrix w = x - eta * g;
    checkFinite(w, k + 1, name);
    Projection p = project(w, r);
    residual = applyOp(inst.op, p.x) - inst.y;
    rec.addEvaluations(m);
    res = residual.squaredNorm();
    checkFinite(res, k + 1, name);
    rec.record(k + 1, p.x, res, eta, rankOf(p.factors));
    const double moved = (p.x - x).squaredNorm();
    x = std::move(p.x);
    if (res <= cfg.tolerance) return rec.finish(x, Termination::ResidualTol);
    if (moved <= cfg.tolerance) return rec.finish(x, Termination::IterateTol);
  }
  return rec.finish(x, Termination::Budget);
}

}  // namespace

RecoveryResult svp(const ProblemInstance& inst, const SolverConfig& cfg) {
  return fullGradientIht(inst, cfg, FullStepKind::Svp);
}

RecoveryResult niht(const ProblemInstance& inst, const SolverConfig& cfg) {
  return fullGradientIht(inst, cfg, FullStepKind::Niht);
}

RecoveryResult stoiht(const ProblemInstance& inst, const SolverConfig& cfg) {
  cfg.validate(inst.m());
  const Index r = inst.rankBudget;
  const int innerN = cfg.innerFor(inst.m());
  Recorder rec(inst);
  // No full gradients are formed, so a BB rule keeps its first step.
  const double eta = resolveInitialStep(cfg.step, inst, cfg, innerN);
  BatchSampler sampler(inst.m(), cfg.batchSize, deriveSeed(cfg.rngSeed, {0x5a3d}));

  Matrix x = initialIterate(inst, cfg);
  double res = residualNorm2(inst, x);
  checkFinite(res, 0, "stoiht");
  rec.record(0, x, res, 0.0, numericalRank(x));
  if (res <= cfg.tolerance) return rec.finish(x, Termination::ResidualTol);

  for (int k = 0; k < cfg.outerIterations; ++k) {
    const Matrix blockStart = x;
    Index rank = 0;
    for (int t = 0; t < innerN; ++t) {
      const IndexBatch batch = sampler.next();
      const Matrix g = stochasticGradient(inst, x, batch);
      rec.addEvaluations(batch.size());
      const Matrix w = x - eta * g;
      checkFinite(w, k + 1, "stoiht");
      Projection p = project(w, r);
      x = std::move(p.x);
      rank = rankOf(p.factors);
    }
    checkFinite(x, k + 1, "stoiht");
    res = residualNorm2(inst, x);
    checkFinite(res, k + 1, "stoiht");
    rec.record(k + 1, x, res, eta, rank);
    if (res <= cfg.tolerance) return rec.finish(x, Termination::ResidualTol);
    if ((x - blockStart).squaredNorm() <= cfg.tolerance)
      return rec.finish(x, Termination::IterateTol);
  }
  return rec.finish(x, Termination::Budget);
}

RecoveryResult svt(const ProblemInstance& inst, const SolverConfig& cfg, const SvtParams& params) {
  cfg.validate(inst.m());
  const double cells = static_cast<double>(inst.op.rows()) * static_cast<double>(inst.op.cols());
  const double tau = params.tau > 0.0 ? params.tau : 5.0 * std::sqrt(cells);
  const double delta =
      params.stepDelta > 0.0 ? params.stepDelta : 1.2 * cells / static_cast<double>(inst.m());
  const double norm = inst.op.meanSquaredNorm();
  const auto m = static_cast<std::uint64_t>(inst.m());
  Recorder rec(inst);

  // Dual variable in matrix units: A^T(.) / mean|A_l|^2 is P_Omega for
  // unit-scaled entry sampling.
  const Matrix backProjected = inst.op.adjoint(inst.y) / norm;
  Matrix dual = Matrix::Zero(inst.op.rows(), inst.op.cols());
  if (params.kick) {
    const double spectral = backProjected.size() ? svd(backProjected).singular(0) : 0.0;
    if (spectral > 0.0) dual = std::ceil(tau / (delta * spectral)) * delta * backProjected;
  }

  Matrix x;
  for (int k = 0; k <= cfg.outerIterations; ++k) {
    checkFinite(dual, k, "svt");
    x = softThresholdSingular(dual, tau);
    const Vector residual = applyOp(inst.op, x) - inst.y;
    rec.addEvaluations(m);
    const double res = residual.squaredNorm();
    checkFinite(res, k, "svt");
    rec.record(k, x, res, k == 0 ? 0.0 : delta, numericalRank(x));
    if (res <= cfg.tolerance) return rec.finish(x, Termination::ResidualTol);
    if (k == cfg.outerIterations) break;
    dual -= (delta / norm) * inst.op.adjoint(residual);
  }
  return rec.finish(x, Termination::Budget);
}

const char* to_string(SolverKind k) noexcept {
  switch (k) {
    case SolverKind::SvrgArm: return "svrg";
    case SolverKind::Svp: return "svp";
    case SolverKind::Niht: return "niht";
    case SolverKind::StoIht: return "stoiht";
    case SolverKind::Svt: return "svt";
  }
  return "unknown";
}

SolverKind parseSolverKind(const std::string& name) {
  if (name == "svrg" || name == "svrg-arm") return SolverKind::SvrgArm;
  if (name == "svp") return SolverKind::Svp;
  if (name == "niht") return SolverKind::Niht;
  if (name == "stoiht") return SolverKind::StoIht;
  if (name == "svt") return SolverKind::Svt;
  fail(ErrorKind::Configuration, "unknown solver '" + name + "'");
}

RecoveryResult runSolver(SolverKind kind, const ProblemInstance& inst, const SolverConfig& cfg,
                         const SvtParams& svtParams) {
  switch (kind) {
    case SolverKind::SvrgArm: return svrgArm(inst, cfg);
    case SolverKind::Svp: return svp(inst, cfg);
    case SolverKind::Niht: return niht(inst, cfg);
    case SolverKind::StoIht: return stoiht(inst, cfg);
    case SolverKind::Svt: return svt(inst, cfg, svtParams);
  }
  fail(ErrorKind::Configuration, "unknown solver");
}

}  // namespace lowrank
