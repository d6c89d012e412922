#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "lowrank/config.hpp"
#include "lowrank/csv.hpp"
#include "lowrank/error.hpp"
#include "lowrank/experiments.hpp"
#include "lowrank/random.hpp"
#include "lowrank/theory.hpp"

using namespace lowrank;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumeric = 2, kIo = 3 };

int exitCodeFor(ErrorKind k) {
  switch (k) {
    case ErrorKind::Divergence:
    case ErrorKind::DegenerateStep: return kNumeric;
    case ErrorKind::Io:
    case ErrorKind::Format: return kIo;
    default: return kUsage;
  }
}

/// Options shared by the report-producing subcommands.
struct Common {
  std::string configPath;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string output;
  // One slot per config key, filled only when given on the command line.
  std::map<std::string, std::string> flags;
  std::vector<std::string> flagOrder;
};

void addCommon(CLI::App* sub, Common& c, bool withKeys = true) {
  sub->add_option("--config", c.configPath, "key = value configuration file");
  sub->add_option("--set", c.sets, "override: key=value (repeatable)");
  sub->add_option("--seed", c.seed, "master seed (required)");
  sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("-o,--output", c.output, "CSV output path (default stdout)");
  if (!withKeys) return;
  for (const auto& [key, value] : RunConfig{}.entries()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    c.flagOrder.push_back(key);
    sub->add_option("--" + flag, c.flags[key], "config key '" + key + "' (default " + value + ")");
  }
}

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// defaults < config file < command line.
RunConfig resolve(const Common& c, const char* subcommand) {
  if (!c.seed) fail(ErrorKind::Configuration, std::string(subcommand) + ": --seed is required");
  RunConfig cfg;
  if (!c.configPath.empty()) parseConfig(readFile(c.configPath), cfg);
  for (const auto& key : c.flagOrder) {
    const auto& v = c.flags.at(key);
    if (!v.empty()) {
      try {
        cfg.set(key, v);
      } catch (const Error& e) {
        fail(ErrorKind::Parse, std::string("command line: ") + e.what());
      }
    }
  }
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Parse, "--set expects key=value, got '" + s + "'");
    try {
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    } catch (const Error& e) {
      fail(ErrorKind::Parse, std::string("command line: ") + e.what());
    }
  }
  return cfg;
}

std::vector<std::pair<std::string, std::string>> preamble(const char* cmd, const RunConfig& cfg,
                                                          std::uint64_t seed) {
  std::vector<std::pair<std::string, std::string>> p{{"command", cmd},
                                                     {"seed", std::to_string(seed)}};
  for (auto& kv : cfg.entries()) p.push_back(std::move(kv));
  return p;
}

void emit(const Common& c, const CsvTable& table) {
  if (c.output.empty() || c.output == "-") {
    std::cout << writeCsv(table);
    std::cout.flush();
    if (!std::cout) fail(ErrorKind::Io, "write to stdout failed");
  } else {
    saveCsv(c.output, table);
  }
}

std::vector<experiments::SolverSetup> setups(const RunConfig& cfg, Index m) {
  std::vector<experiments::SolverSetup> out;
  for (const auto& name : cfg.solvers) out.push_back(cfg.solverSetup(name, m));
  return out;
}

int runSolve(const Common& c) {
  const RunConfig cfg = resolve(c, "solve");
  experiments::SyntheticSpec spec = cfg.syntheticSpec();
  spec.seed = deriveSeed(*c.seed, {0});
  const ProblemInstance inst = experiments::makeCompletionInstance(spec);
  experiments::SolverSetup s = cfg.solverSetup(cfg.solver, inst.m());
  s.config.rngSeed = deriveSeed(*c.seed, {1});
  const RecoveryResult res = runSolver(s.kind, inst, s.config, s.svt);
  const TraceRow& last = res.trace.last();
  std::ostream& info = c.output.empty() ? std::cerr : std::cout;
  info << "solver: " << s.label << "\n"
       << "termination: " << to_string(res.terminated) << "\n"
       << "iterations: " << last.iteration << "\n"
       << "final residual: " << formatReal(last.residual) << "\n";
  if (last.relativeError) info << "relative error: " << formatReal(*last.relativeError) << "\n";
  info << "gradient evaluations: " << last.gradientEvaluations << "\n";
  CsvTable t = traceTable(res.trace);
  t.preamble = preamble("solve", cfg, *c.seed);
  emit(c, t);
  return kOk;
}

Index syntheticM(const RunConfig& cfg) {
  experiments::SyntheticSpec s = cfg.syntheticSpec();
  return s.sampleCount();
}

int runSweep(const Common& c, const char* cmd, bool summary) {
  const RunConfig cfg = resolve(c, cmd);
  experiments::RunOptions opts{cfg.trials, *c.seed, c.jobs};
  const experiments::SyntheticSpec base = cfg.syntheticSpec();
  const auto solvers = setups(cfg, syntheticM(cfg));
  const auto records = std::string(cmd) == "freq"
                           ? experiments::runRecoveryFrequency(cfg.ranks, base, solvers, opts)
                           : experiments::runNoiseSweep(cfg.sigmas, base, solvers, opts);
  CsvTable t = summary ? summaryTable(experiments::summarize(records)) : recordTable(records);
  t.preamble = preamble(cmd, cfg, *c.seed);
  emit(c, t);
  return kOk;
}

int runPhase(const Common& c) {
  const RunConfig cfg = resolve(c, "phase");
  experiments::RunOptions opts{cfg.trials, *c.seed, c.jobs};
  // Batch and inner length resolve per cell from m, so each cell gets its own setup.
  experiments::GridReport grid;
  grid.ranks = cfg.ranks;
  grid.ratios = cfg.ratios;
  grid.trials = cfg.trials;
  grid.masterSeed = *c.seed;
  std::vector<experiments::SyntheticSpec> cells;
  for (Index r : cfg.ranks)
    for (double rho : cfg.ratios) {
      experiments::SyntheticSpec s = cfg.syntheticSpec();
      s.rank = r;
      s.sampleRatio = rho;
      cells.push_back(s);
    }
  grid.fraction.assign(cells.size(), 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    experiments::RunOptions cellOpts = opts;
    cellOpts.masterSeed = deriveSeed(*c.seed, {i});
    const auto solver = cfg.solverSetup(cfg.solver, cells[i].sampleCount());
    const auto recs = experiments::runCells({cells[i]}, {solver}, cellOpts);
    for (const auto& r : recs) grid.fraction[i] += r.success ? 1.0 : 0.0;
    grid.fraction[i] /= cfg.trials;
  }
  CsvTable t = gridTable(grid);
  t.preamble = preamble("phase", cfg, *c.seed);
  emit(c, t);
  return kOk;
}

struct ImageArgs {
  std::string input;
  std::string restored;
};

int runImage(const Common& c, const ImageArgs& a) {
  const RunConfig cfg = resolve(c, "image");
  experiments::ImageTask task;
  task.source = loadPixmap(a.input);
  task.observedFraction = cfg.observed;
  task.maskSeed = deriveSeed(*c.seed, {0});
  task.rank = cfg.imageRank;
  task.mode = cfg.channel;
  const double cells = static_cast<double>(task.source.width) * task.source.height;
  const auto m = std::max<Index>(1, static_cast<Index>(std::floor(cfg.observed * cells + 1e-9)));
  experiments::SolverSetup s = cfg.solverSetup(cfg.solver, m);
  s.config.rngSeed = deriveSeed(*c.seed, {1});
  const auto res = experiments::imageComplete(task, s);
  if (!a.restored.empty()) savePixmap(a.restored, res.restored);
  std::uint64_t evals = 0;
  for (const auto& ch : res.channels) evals += ch.trace.last().gradientEvaluations;
  CsvTable t;
  t.preamble = preamble("image", cfg, *c.seed);
  t.preamble.emplace_back("input", a.input);
  t.header = {"solver", "width", "height", "channels", "observed", "rank", "psnr", "ssim",
              "gradient_evaluations"};
  t.rows.push_back({s.label, std::to_string(task.source.width),
                    std::to_string(task.source.height), std::to_string(res.restored.channels),
                    formatReal(cfg.observed), std::to_string(std::min<Index>(
                        task.rank, std::min(task.source.width, task.source.height))),
                    formatReal(res.psnr), formatReal(res.ssim), std::to_string(evals)});
  emit(c, t);
  return kOk;
}

struct TheoryArgs {
  std::optional<double> delta;
  std::optional<double> eta;
  std::optional<int> inner;
};

void printInterval(const char* name, const theory::StepInterval& iv) {
  std::cout << name << ": ";
  if (!iv.nonempty) {
    std::cout << "empty";
    if (std::isfinite(iv.lower)) std::cout << " (degenerate point " << formatReal(iv.lower) << ")";
    std::cout << "\n";
    return;
  }
  std::cout << (iv.open ? "(" : "[") << formatReal(iv.lower) << ", " << formatReal(iv.upper)
            << (iv.open ? ")" : "]") << "\n";
}

int runTheory(const TheoryArgs& a) {
  const double delta = a.delta.value_or(0.0);
  std::cout << "delta: " << formatReal(delta) << "\n";
  printInterval("linear convergence step interval", theory::linearConvergenceInterval(delta));
  printInterval("objective contraction step interval",
                theory::objectiveContractionInterval(delta));
  if (!a.eta) return kOk;
  const auto k = theory::convergenceConstants(delta, *a.eta, a.inner.value_or(1));
  std::cout << "eta: " << formatReal(k.eta) << "\ninner: " << k.innerN
            << "\nrho: " << formatReal(k.rho)
            << "\nkappa: " << (k.kappa ? formatReal(*k.kappa) : "undefined (rho >= 1)")
            << "\nmu: " << formatReal(k.mu) << "\nnu: " << formatReal(k.nu)
            << "\nbeta: " << (k.beta ? formatReal(*k.beta) : "undefined (mu = 1)")
            << "\nkappa < 1: " << (k.kappaBelowOne() ? "yes" : "no")
            << "\nbeta < 1: " << (k.betaBelowOne() ? "yes" : "no") << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank matrix recovery: solvers, theory constants and experiments"};
  app.require_subcommand(1);

  Common solveC, freqC, phaseC, noiseC, imageC;
  bool freqSummary = false, noiseSummary = false;
  ImageArgs imageA;
  TheoryArgs theoryA;

  auto* solve = app.add_subcommand("solve", "solve one synthetic completion instance");
  addCommon(solve, solveC);
  auto* freq = app.add_subcommand("freq", "recovery frequency versus rank");
  addCommon(freq, freqC);
  freq->add_flag("--summary", freqSummary, "per-cell aggregates instead of per-trial rows");
  auto* phase = app.add_subcommand("phase", "phase-transition grid over rank and sample ratio");
  addCommon(phase, phaseC);
  auto* noise = app.add_subcommand("noise", "relative error versus noise level");
  addCommon(noise, noiseC);
  noise->add_flag("--summary", noiseSummary, "per-cell aggregates instead of per-trial rows");
  auto* image = app.add_subcommand("image", "image completion with PSNR/SSIM");
  addCommon(image, imageC);
  image->add_option("--input", imageA.input, "P5/P6 pixmap")->required();
  image->add_option("--restored", imageA.restored, "write the restored image here");
  auto* theoryCmd = app.add_subcommand("theory", "step intervals and convergence constants");
  theoryCmd->add_option("--delta", theoryA.delta, "restricted isometry constant in [0, 1)");
  theoryCmd->add_option("--eta", theoryA.eta, "step size");
  theoryCmd->add_option("--inner", theoryA.inner, "inner loop length")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*solve) return runSolve(solveC);
    if (*freq) return runSweep(freqC, "freq", freqSummary);
    if (*phase) return runPhase(phaseC);
    if (*noise) return runSweep(noiseC, "noise", noiseSummary);
    if (*image) return runImage(imageC, imageA);
    if (*theoryCmd) return runTheory(theoryA);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
