// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "lowrank/config.hpp"
#include "lowrank/error.hpp"
#include "lowrank/experiments.hpp"
#include "lowrank/pixmap.hpp"
#include "lowrank/solvers.hpp"
#include "lowrank/theory.hpp"

using namespace lowrank;
using namespace lowrank::experiments;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

int workers() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

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

// 50 x 50, rho = 0.5 with the harness defaults (batch m/25, 25 inner steps,
// BB steps clamped to 1/25).
SolverSetup harness(const std::string& solver) {
  RunConfig cfg;
  return cfg.solverSetup(solver, SyntheticSpec{}.sampleCount());
}

Verdict exactRecovery() {
  SyntheticSpec base;
  std::vector<Index> ranks{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const int trials = 20;
  auto recs = runRecoveryFrequency(ranks, base, {harness("svrg")}, {trials, 20240101, workers()});
  auto cells = summarize(recs);
  bool ok = true;
  std::ostringstream os;
  os << "fractions";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    os << " r" << ranks[i] << "=" << cells[i].successFraction;
    if (ranks[i] <= 4 && cells[i].successFraction < 0.95) ok = false;
    if (i > 0 && cells[i].successFraction > cells[i - 1].successFraction + 1.0 / trials + 1e-12)
      ok = false;
  }
  return {ok, os.str()};
}

std::uint64_t evaluationsToResidual(const RecoveryResult& res, double target) {
  for (const auto& row : res.trace.rows)
    if (row.residual <= target) return row.gradientEvaluations;
  return std::numeric_limits<std::uint64_t>::max();
}

Verdict varianceReduction() {
  // SVRG pays m per outer for the snapshot on top of StoIHT's m per pass, so
  // StoIHT gets twice the outer iterations for the same budget.
  auto svrg = harness("svrg");
  auto sto = harness("stoiht");
  svrg.config.tolerance = sto.config.tolerance = 1e-11;
  svrg.config.outerIterations = 150;
  sto.config.outerIterations = 300;
  const double target = 1e-6;
  int wins = 0;
  std::ostringstream os;
  os << "evaluations to residual 1e-6 (svrg/stoiht):";
  for (int pair = 0; pair < 10; ++pair) {
    SyntheticSpec s;
    s.rank = 4;
    s.seed = deriveSeed(777, {static_cast<std::uint64_t>(pair)});
    auto inst = makeCompletionInstance(s);
    auto a = svrg, b = sto;
    a.config.rngSeed = b.config.rngSeed = deriveSeed(s.seed, {1});
    std::uint64_t ea = std::numeric_limits<std::uint64_t>::max(), eb = ea;
    try {
      ea = evaluationsToResidual(runSolver(a.kind, inst, a.config), target);
    } catch (const Error&) {
    }
    try {
      eb = evaluationsToResidual(runSolver(b.kind, inst, b.config), target);
    } catch (const Error&) {
    }
    auto show = [](std::uint64_t e) {
      return e == std::numeric_limits<std::uint64_t>::max() ? std::string("never") : std::to_string(e);
    };
    os << " " << show(ea) << "/" << show(eb);
    if (ea < eb) ++wins;
  }
  os << "; svrg fewer in " << wins << "/10";
  return {wins >= 8, os.str()};
}

Verdict noiseRobustness() {
  SyntheticSpec base;
  base.rank = 2;
  std::vector<double> sigmas{0.0, 0.1, 0.2, 0.3, 0.4};
  const int trials = 10;
  std::vector<SolverSetup> solvers{harness("svrg"), harness("svp"), harness("niht"),
                                   harness("stoiht"), harness("svt")};
  auto recs = runNoiseSweep(sigmas, base, solvers, {trials, 4242, workers()});
  auto cells = summarize(recs);
  bool ok = true;
  int diverged = 0;
  std::vector<double> svrgMean, svrgWorst;
  for (const auto& c : cells) {
    diverged += c.diverged;
    if (!std::isfinite(c.meanRelativeError)) ok = false;
  }
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    double worst = 0.0;
    for (const auto& r : recs)
      if (r.cell == i && r.solver == "svrg") worst = std::max(worst, r.relativeError);
    svrgWorst.push_back(worst);
  }
  for (const auto& c : cells)
    if (c.solver == "svrg") svrgMean.push_back(c.meanRelativeError);
  if (diverged) ok = false;
  if (svrgMean[0] > 1e-3) ok = false;
  // One-trial slack: a single trial may move the mean by at most worst/trials.
  for (std::size_t i = 1; i < svrgMean.size(); ++i)
    if (svrgMean[i] < svrgMean[i - 1] - svrgWorst[i - 1] / trials) ok = false;
  std::ostringstream os;
  os << "svrg mean relative error";
  for (std::size_t i = 0; i < sigmas.size(); ++i) os << " s" << sigmas[i] << "=" << fmt("%.3g", svrgMean[i]);
  os << "; diverged trials " << diverged;
  return {ok, os.str()};
}

Verdict theoryConstants() {
  const auto start = Clock::now();
  bool ok = true;
  std::ostringstream os;
  auto z = theory::linearConvergenceInterval(0.0);
  ok &= z.lower == 5.0 / 12.0 && z.upper == 7.0 / 12.0 && z.nonempty;
  auto d = theory::linearConvergenceInterval(1.0 / 71.0);
  ok &= !d.nonempty && std::abs(d.lower - 71.0 / 144.0) <= 1e-12 && std::abs(d.upper - 71.0 / 144.0) <= 1e-12;
  for (double delta : {1.0 / 71.0 + 1e-12, 0.02, 0.1, 0.5, 0.99}) ok &= !theory::linearConvergenceInterval(delta).nonempty;
  auto o = theory::objectiveContractionInterval(0.0);
  ok &= o.lower == 0.0 && o.upper == 0.25 && o.nonempty;

  int cells = 0, kappaOk = 0, rhoAtLeastOne = 0;
  for (double delta : {0.0, 0.005, 0.01, 1.0 / 71.0 - 1e-6}) {
    auto iv = theory::linearConvergenceInterval(delta);
    for (int i = 1; i <= 20; ++i) {
      double eta = iv.at(i / 21.0);
      for (int n : {10, 100, 1000}) {
        auto c = theory::convergenceConstants(delta, eta, n);
        ++cells;
        if (c.rho >= 1.0) {
          ++rhoAtLeastOne;
          os << " [rho>=1 at delta=" << delta << " eta=" << eta << " n=" << n << "]";
          continue;
        }
        if (c.kappaBelowOne()) ++kappaOk;
        else ok = false;
      }
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  ok &= secs < 1.0;
  std::ostringstream head;
  head << "exact intervals checked; kappa<1 in " << kappaOk << "/" << cells - rhoAtLeastOne
       << " cells with rho<1; rho>=1 cells " << rhoAtLeastOne << os.str() << "; " << fmt("%.3f", secs) << " s";
  return {ok, head.str()};
}

Verdict lemmaSuite() {
  const auto start = Clock::now();
  auto inst = gaussianEnsemble(12, 2, 200, 515);
  auto rep = theory::lemmaChecker(inst, 1000, 99);
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  bool ok = rep.gatedViolations() == 0 && rep.worstIdentityRelError <= 1e-10 &&
            rep.gradientIdentity.violations == 0 && secs <= 60.0;
  std::ostringstream os;
  os << rep.trials << " trials, violations " << rep.gatedViolations() << ", worst identity error "
     << fmt("%.2e", rep.worstIdentityRelError) << ", " << fmt("%.1f", secs) << " s";
  return {ok, os.str()};
}

Verdict unbiasedness() {
  bool ok = true;
  double worst = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto inst = gaussianEnsemble(6, 2, 80, seed);
    Rng rng(seed + 10);
    Matrix x = gaussian(6, 6, rng), snap = gaussian(6, 6, rng);
    Matrix gk = fullGradient(inst, snap);
    Matrix mean = Matrix::Zero(6, 6);
    for (Index l = 0; l < inst.m(); ++l)
      mean += varianceReducedDirection(inst, x, snap, gk, IndexBatch::single(l));
    mean /= static_cast<double>(inst.m());
    worst = std::max(worst, (mean - fullGradient(inst, x)).cwiseAbs().maxCoeff());
  }
  ok &= worst <= 1e-12;

  SyntheticSpec s;
  s.rank = 3;
  s.seed = 61;
  auto inst = makeCompletionInstance(s);
  SolverConfig c;
  c.step = FixedStep{0.45};
  c.batchSize = inst.m();
  c.innerIterations = 1;
  c.outerIterations = 60;
  c.tolerance = 1e-300;
  auto a = svrgArm(inst, c);
  auto b = svp(inst, c);
  bool same = a.estimate == b.estimate && a.trace.rows.size() == b.trace.rows.size();
  for (std::size_t i = 0; same && i < a.trace.rows.size(); ++i)
    same = a.trace.rows[i].residual == b.trace.rows[i].residual;
  ok &= same;
  return {ok, "max deviation of singleton mean " + fmt("%.2e", worst) +
                  (same ? "; full-batch trajectory bit-identical to svp" : "; trajectories differ")};
}

Verdict eckartYoung() {
  Rng rng(2718);
  int beaten = 0;
  double worstTail = 0.0;
  for (int t = 0; t < 100; ++t) {
    Matrix w = gaussian(6, 6, rng);
    Matrix h = hardThresholdRank(w, 2);
    double best = (h - w).norm();
    Eigen::JacobiSVD<Matrix> ref(w);
    double tail = ref.singularValues().tail(4).squaredNorm();
    worstTail = std::max(worstTail, std::abs((h - w).squaredNorm() - tail) / tail);
    bool all = true;
    for (int k = 0; k < 1000; ++k) {
      Matrix y = gaussian(6, 2, rng) * gaussian(2, 6, rng);
      if ((y - w).norm() < best) all = false;
    }
    beaten += all;
  }
  return {beaten == 100 && worstTail <= 1e-8,
          std::to_string(beaten) + "/100 matrices beat every candidate; worst tail-sum error " +
              fmt("%.2e", worstTail)};
}

Verdict imageOrdering() {
  const auto start = Clock::now();
  PixmapImage img = loadPixmap(LOWRANK_TEST_DATA "/chelsea256.pgm");
  const Index m = 256 * 256 / 2;
  const int n = 16;
  SolverSetup svrg;
  svrg.kind = SolverKind::SvrgArm;
  svrg.config.batchSize = m / n;
  svrg.config.innerIterations = n;
  svrg.config.outerIterations = 30;
  svrg.config.step = BarzilaiBorweinStep{0.0, 1e-6, 1.0 / n};
  SolverSetup sto = svrg;
  sto.kind = SolverKind::StoIht;
  sto.config.outerIterations = 60;

  int wins = 0;
  bool ssimOk = true;
  std::ostringstream os;
  os << "psnr/ssim svrg vs stoiht:";
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ImageTask t;
    t.source = img;
    t.observedFraction = 0.5;
    t.maskSeed = seed;
    t.rank = 30;
    auto a = imageComplete(t, svrg);
    auto b = imageComplete(t, sto);
    if (a.psnr >= b.psnr) ++wins;
    if (a.ssim < 0.7 || b.ssim < 0.7) ssimOk = false;
    os << " [" << fmt("%.2f", a.psnr) << "/" << fmt("%.3f", a.ssim) << " vs " << fmt("%.2f", b.psnr)
       << "/" << fmt("%.3f", b.ssim) << "]";
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  os << "; svrg psnr higher in " << wins << "/5; " << fmt("%.0f", secs) << " s";
  return {wins >= 4 && ssimOk && secs <= 600.0, os.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / ("lowrank_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string cli = LOWRANK_CLI;
  const std::string image = LOWRANK_TEST_DATA "/chelsea256.pgm";
  struct Case {
    std::string name, args;
  };
  std::vector<Case> cases{
      {"solve", "solve --seed 11 --rank 3 --outer 40"},
      {"freq", "freq --seed 12 --trials 4 --ranks 1..4 --outer 40"},
      {"freq-summary", "freq --summary --seed 12 --trials 4 --ranks 1..3 --outer 40"},
      {"phase", "phase --seed 13 --trials 3 --ranks 1,3 --ratios 0.3,0.6 --outer 30"},
      {"noise", "noise --seed 14 --trials 3 --sigmas 0:0.2:0.4 --solvers svrg,stoiht,svt --outer 30"},
      {"image", "image --seed 15 --input " + image + " --outer 3 --image-rank 10"},
  };
  bool ok = true;
  std::ostringstream os;
  int identical = 0;
  for (const auto& c : cases) {
    std::vector<std::string> outputs;
    for (const char* jobs : {"1", "8", "1"}) {
      const fs::path out = dir / (c.name + "_" + std::to_string(outputs.size()) + ".csv");
      const std::string cmd = cli + " " + c.args + " --jobs " + jobs + " -o " + out.string() + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        ok = false;
        os << " " << c.name << ": command failed;";
        outputs.push_back("");
        continue;
      }
      outputs.push_back(slurp(out));
    }
    bool same = !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
    if (same) ++identical;
    else {
      ok = false;
      os << " " << c.name << " differs;";
    }
  }
  fs::remove_all(dir);
  return {ok, std::to_string(identical) + "/" + std::to_string(cases.size()) +
                  " report subcommands byte-identical across reruns and --jobs 1/8" + os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  std::vector<Criterion> all{
      {1, "exact-recovery frequency", exactRecovery},
      {2, "variance-reduction benefit", varianceReduction},
      {3, "noise robustness", noiseRobustness},
      {4, "theory constants", theoryConstants},
      {5, "lemma suite", lemmaSuite},
      {6, "unbiasedness and degeneracy", unbiasedness},
      {7, "Eckart-Young property", eckartYoung},
      {8, "image ordering", imageOrdering},
      {9, "determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name,
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed ? 1 : 0;
}
