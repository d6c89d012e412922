#include "lowrank/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <mutex>
#include <thread>

#include "lowrank/error.hpp"
#include "lowrank/random.hpp"

namespace lowrank::experiments {

namespace {

enum Stream : std::uint64_t { kTruth = 1, kMask = 2, kNoise = 3 };

std::vector<Entry> sampleEntries(Index rows, Index cols, Index count, std::uint64_t seed) {
  const Index total = rows * cols;
  std::vector<Index> pool(static_cast<std::size_t>(total));
  std::iota(pool.begin(), pool.end(), Index{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform subset.
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, total - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  std::vector<Entry> out;
  out.reserve(pool.size());
  for (Index k : pool) out.push_back({k % rows, k / rows});
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto bad = [](const std::string& w) { fail(ErrorKind::Configuration, w); };
  if (n1 < 1 || n2 < 1) bad("dimensions must be positive");
  if (rank < 1 || rank > std::min(n1, n2)) bad("rank must lie in [1, min(n1, n2)]");
  if (!(sampleRatio > 0.0 && sampleRatio <= 1.0)) bad("sample ratio must lie in (0, 1]");
  if (sampleCount() < 1) bad("sample ratio selects no entries");
  if (!(noiseSigma >= 0.0) || !std::isfinite(noiseSigma)) bad("noise sigma must be >= 0");
}

Index SyntheticSpec::sampleCount() const {
  const double cells = static_cast<double>(n1) * static_cast<double>(n2);
  return static_cast<Index>(std::floor(sampleRatio * cells + 1e-9));
}

Matrix genLowRank(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(deriveSeed(spec.seed, {kTruth}));
  std::normal_distribution<double> normal;
  Matrix a(spec.n1, spec.rank), b(spec.rank, spec.n2);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = normal(rng);
  return a * b;
}

std::vector<Entry> genMask(const SyntheticSpec& spec) {
  spec.validate();
  return sampleEntries(spec.n1, spec.n2, spec.sampleCount(), deriveSeed(spec.seed, {kMask}));
}

Vector addNoise(const Vector& y, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) fail(ErrorKind::InvalidInput, "addNoise: sigma must be >= 0");
  if (sigma == 0.0) return y;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Vector out = y;
  for (Index i = 0; i < out.size(); ++i) out(i) += normal(rng);
  return out;
}

ProblemInstance makeCompletionInstance(const SyntheticSpec& spec) {
  Matrix truth = genLowRank(spec);
  MeasurementOp op = MeasurementOp::entrySampling(spec.n1, spec.n2, genMask(spec));
  Vector y = op.apply(truth);
  const bool noiseless = spec.noiseSigma == 0.0;
  if (!noiseless) y = addNoise(y, spec.noiseSigma * op.scale(), deriveSeed(spec.seed, {kNoise}));
  return ProblemInstance(std::move(op), std::move(y), spec.rank, std::move(truth), noiseless);
}

namespace {

/// Runs fn(i) for i in [0, count) on up to `jobs` threads.
void parallelFor(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr firstError;
  std::mutex errorMutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(errorMutex);
          if (!firstError) firstError = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (firstError) std::rethrow_exception(firstError);
}

TrialRecord runOne(const ProblemInstance& inst, const SyntheticSpec& spec, const SolverSetup& s,
                   std::uint64_t solverSeed) {
  TrialRecord rec;
  rec.spec = spec;
  rec.solver = s.label.empty() ? to_string(s.kind) : s.label;
  SolverConfig cfg = s.config;
  cfg.rngSeed = solverSeed;
  const auto start = std::chrono::steady_clock::now();
  try {
    const RecoveryResult res = runSolver(s.kind, inst, cfg, s.svt);
    const TraceRow& last = res.trace.last();
    rec.relativeError = last.relativeError.value_or(std::numeric_limits<double>::quiet_NaN());
    rec.gradientEvaluations = last.gradientEvaluations;
    rec.outerIterations = last.iteration;
    rec.finalResidual = last.residual;
    rec.termination = to_string(res.terminated);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Divergence) throw;
    rec.diverged = true;
    rec.relativeError = std::numeric_limits<double>::infinity();
    rec.finalResidual = std::numeric_limits<double>::infinity();
    rec.termination = "divergence";
  }
  rec.wallClock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rec.success = rec.relativeError <= kSuccessThreshold;
  return rec;
}

}  // namespace

std::vector<TrialRecord> runCells(const std::vector<SyntheticSpec>& cells,
                                  const std::vector<SolverSetup>& solvers,
                                  const RunOptions& opts) {
  if (opts.trials < 1) fail(ErrorKind::Configuration, "trials must be >= 1");
  if (solvers.empty()) fail(ErrorKind::Configuration, "no solvers selected");
  for (const auto& c : cells) c.validate();
  const auto trials = static_cast<std::size_t>(opts.trials);
  const std::size_t tasks = cells.size() * trials;
  std::vector<TrialRecord> records(tasks * solvers.size());

  parallelFor(tasks, opts.jobs, [&](std::size_t task) {
    const std::size_t cell = task / trials;
    const std::size_t trial = task % trials;
    SyntheticSpec spec = cells[cell];
    spec.seed = deriveSeed(opts.masterSeed, {cell, trial});
    const ProblemInstance inst = makeCompletionInstance(spec);
    for (std::size_t s = 0; s < solvers.size(); ++s) {
      TrialRecord rec = runOne(inst, spec, solvers[s], deriveSeed(spec.seed, {s + 1}));
      rec.cell = cell;
      rec.trial = static_cast<int>(trial);
      records[task * solvers.size() + s] = std::move(rec);
    }
  });
  return records;
}

std::vector<TrialRecord> runRecoveryFrequency(const std::vector<Index>& ranks,
                                              const SyntheticSpec& base,
                                              const std::vector<SolverSetup>& solvers,
                                              const RunOptions& opts) {
  std::vector<SyntheticSpec> cells;
  for (Index r : ranks) {
    SyntheticSpec s = base;
    s.rank = r;
    cells.push_back(s);
  }
  return runCells(cells, solvers, opts);
}

std::vector<TrialRecord> runNoiseSweep(const std::vector<double>& sigmas,
                                       const SyntheticSpec& base,
                                       const std::vector<SolverSetup>& solvers,
                                       const RunOptions& opts) {
  std::vector<SyntheticSpec> cells;
  for (double sigma : sigmas) {
    SyntheticSpec s = base;
    s.noiseSigma = sigma;
    cells.push_back(s);
  }
  return runCells(cells, solvers, opts);
}

GridReport runPhaseTransition(const std::vector<Index>& ranks, const std::vector<double>& ratios,
                              const SyntheticSpec& base, const SolverSetup& solver,
                              const RunOptions& opts) {
  std::vector<SyntheticSpec> cells;
  for (Index r : ranks)
    for (double rho : ratios) {
      SyntheticSpec s = base;
      s.rank = r;
      s.sampleRatio = rho;
      cells.push_back(s);
    }
  GridReport g;
  g.ranks = ranks;
  g.ratios = ratios;
  g.trials = opts.trials;
  g.masterSeed = opts.masterSeed;
  g.records = runCells(cells, {solver}, opts);
  g.fraction.assign(cells.size(), 0.0);
  for (const auto& rec : g.records)
    if (rec.success) g.fraction[rec.cell] += 1.0;
  for (double& f : g.fraction) f /= opts.trials;
  return g;
}

std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records) {
  std::vector<CellSummary> out;
  for (const auto& rec : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CellSummary& c) {
      return c.cell == rec.cell && c.solver == rec.solver;
    });
    if (it == out.end()) {
      CellSummary c;
      c.cell = rec.cell;
      c.spec = rec.spec;
      c.solver = rec.solver;
      out.push_back(c);
      it = out.end() - 1;
    }
    ++it->trials;
    it->successFraction += rec.success ? 1.0 : 0.0;
    it->meanRelativeError += rec.relativeError;
    it->meanGradientEvaluations += static_cast<double>(rec.gradientEvaluations);
    it->diverged += rec.diverged ? 1 : 0;
  }
  for (auto& c : out) {
    c.successFraction /= c.trials;
    c.meanRelativeError /= c.trials;
    c.meanGradientEvaluations /= c.trials;
  }
  return out;
}

double psnr(const Matrix& reference, const Matrix& estimate, double peak) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols())
    fail(ErrorKind::InvalidInput, "psnr: dimension mismatch");
  if (!(peak > 0.0)) fail(ErrorKind::InvalidInput, "psnr: peak must be > 0");
  if (reference.size() == 0) fail(ErrorKind::InvalidInput, "psnr: empty image");
  const double mse = (reference - estimate).squaredNorm() / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWindow = 11;

/// Valid-mode separable filtering with a normalized Gaussian kernel.
Matrix gaussianFilterValid(const Matrix& img) {
  static const Vector kernel = [] {
    Vector k(kWindow);
    const double sigma = 1.5;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kWindow / 2;
      k(i) = std::exp(-d * d / (2.0 * sigma * sigma));
    }
    return Vector(k / k.sum());
  }();
  const Index outR = img.rows() - kWindow + 1, outC = img.cols() - kWindow + 1;
  Matrix tmp = Matrix::Zero(outR, img.cols());
  for (int k = 0; k < kWindow; ++k) tmp += kernel(k) * img.middleRows(k, outR);
  Matrix out = Matrix::Zero(outR, outC);
  for (int k = 0; k < kWindow; ++k) out += kernel(k) * tmp.middleCols(k, outC);
  return out;
}

}  // namespace

double ssim(const Matrix& reference, const Matrix& estimate, double peak) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols())
    fail(ErrorKind::InvalidInput, "ssim: dimension mismatch");
  if (!(peak > 0.0)) fail(ErrorKind::InvalidInput, "ssim: peak must be > 0");
  if (reference.rows() < kWindow || reference.cols() < kWindow)
    fail(ErrorKind::InvalidInput, "ssim: image smaller than the 11x11 window");
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const Matrix& x = reference;
  const Matrix& y = estimate;
  const Matrix mx = gaussianFilterValid(x);
  const Matrix my = gaussianFilterValid(y);
  const Matrix sxx = gaussianFilterValid(x.cwiseProduct(x)) - mx.cwiseProduct(mx);
  const Matrix syy = gaussianFilterValid(y.cwiseProduct(y)) - my.cwiseProduct(my);
  const Matrix sxy = gaussianFilterValid(x.cwiseProduct(y)) - mx.cwiseProduct(my);
  const auto num = (2.0 * mx.cwiseProduct(my).array() + c1) * (2.0 * sxy.array() + c2);
  const auto den = (mx.array().square() + my.array().square() + c1) *
                   (sxx.array() + syy.array() + c2);
  return (num / den).mean();
}

void ImageTask::validate() const {
  if (!(observedFraction > 0.0 && observedFraction <= 1.0))
    fail(ErrorKind::Configuration, "observed fraction must lie in (0, 1]");
  if (source.width < 2 || source.height < 2)
    fail(ErrorKind::InvalidInput, "image must be at least 2x2");
  if (source.channels != 1 && source.channels != 3)
    fail(ErrorKind::Format, "image must have 1 or 3 channels");
  if (source.samples.size() !=
      static_cast<std::size_t>(source.width) * source.height * source.channels)
    fail(ErrorKind::Format, "image sample count does not match dimensions");
  if (rank < 1) fail(ErrorKind::Configuration, "rank must be >= 1");
}

Matrix luminance(const PixmapImage& img) {
  Matrix out(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      if (img.channels == 1) {
        out(r, c) = img.at(r, c);
      } else {
        const double v = 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
        out(r, c) = std::round(std::clamp(v, 0.0, 255.0));
      }
    }
  return out;
}

std::vector<Matrix> imagePlanes(const PixmapImage& img, ChannelMode mode) {
  if (mode == ChannelMode::Luminance) return {luminance(img)};
  std::vector<Matrix> planes(static_cast<std::size_t>(img.channels),
                             Matrix(img.height, img.width));
  for (int ch = 0; ch < img.channels; ++ch)
    for (int r = 0; r < img.height; ++r)
      for (int c = 0; c < img.width; ++c) planes[ch](r, c) = img.at(r, c, ch);
  return planes;
}

ImageResult imageComplete(const ImageTask& task, const SolverSetup& solver) {
  task.validate();
  const std::vector<Matrix> planes = imagePlanes(task.source, task.mode);
  const Index rows = task.source.height, cols = task.source.width;
  const Index rank = std::min({task.rank, rows, cols});
  const double cells = static_cast<double>(rows) * static_cast<double>(cols);
  const auto count = std::max<Index>(1, static_cast<Index>(std::floor(task.observedFraction * cells + 1e-9)));
  const std::vector<Entry> mask = sampleEntries(rows, cols, count, task.maskSeed);

  ImageResult out;
  out.restored.width = task.source.width;
  out.restored.height = task.source.height;
  out.restored.channels = static_cast<int>(planes.size());
  out.restored.samples.resize(static_cast<std::size_t>(rows * cols) * planes.size());

  double sqErr = 0.0, ssimSum = 0.0;
  for (std::size_t ch = 0; ch < planes.size(); ++ch) {
    MeasurementOp op = MeasurementOp::entrySampling(rows, cols, mask);
    Vector y = op.apply(planes[ch]);
    ProblemInstance inst(std::move(op), std::move(y), rank, planes[ch], true);
    RecoveryResult res = runSolver(solver.kind, inst, solver.config, solver.svt);
    Matrix est = res.estimate.cwiseMax(0.0).cwiseMin(255.0);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        const double v = std::round(est(r, c));
        est(r, c) = v;
        out.restored.at(static_cast<int>(r), static_cast<int>(c), static_cast<int>(ch)) =
            static_cast<std::uint8_t>(v);
      }
    sqErr += (planes[ch] - est).squaredNorm();
    ssimSum += rows >= kWindow && cols >= kWindow
                   ? ssim(planes[ch], est, PixmapImage::peak)
                   : std::numeric_limits<double>::quiet_NaN();
    out.channels.push_back(std::move(res));
  }
  const double mse = sqErr / (cells * static_cast<double>(planes.size()));
  const double peak = PixmapImage::peak;
  out.psnr = mse == 0.0 ? std::numeric_limits<double>::infinity()
                        : 10.0 * std::log10(peak * peak / mse);
  out.ssim = ssimSum / static_cast<double>(planes.size());
  return out;
}

}  // namespace lowrank::experiments
