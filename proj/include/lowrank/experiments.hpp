#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/operators.hpp"
#include "lowrank/pixmap.hpp"
#include "lowrank/solvers.hpp"

namespace lowrank::experiments {

struct SyntheticSpec {
  Index n1 = 50;
  Index n2 = 50;
  Index rank = 2;
  double sampleRatio = 0.5;
  double noiseSigma = 0.0;
  std::uint64_t seed = 0;

  /// Throws ErrorKind::Configuration.
  void validate() const;
  /// floor(rho * n1 * n2)
  Index sampleCount() const;
};

/// Product of n1 x r and r x n2 standard normal factors.
Matrix genLowRank(const SyntheticSpec& spec);
/// floor(rho n1 n2) distinct entries, uniform without replacement, sorted
/// column-major.
std::vector<Entry> genMask(const SyntheticSpec& spec);
/// y + N(0, sigma^2) per component.
Vector addNoise(const Vector& y, double sigma, std::uint64_t seed);

/// Completion instance: truth, mask and noise each from their own substream
/// of spec.seed. Noise has standard deviation sigma on the matrix entries,
/// i.e. sigma * scale on the measurements.
ProblemInstance makeCompletionInstance(const SyntheticSpec& spec);

/// Relative error at or below this counts as exact recovery.
inline constexpr double kSuccessThreshold = 1e-3;

struct SolverSetup {
  std::string label;
  SolverKind kind = SolverKind::SvrgArm;
  SolverConfig config;
  SvtParams svt;
};

struct TrialRecord {
  std::size_t cell = 0;
  int trial = 0;
  SyntheticSpec spec;
  std::string solver;
  bool success = false;
  double relativeError = 0.0;
  std::uint64_t gradientEvaluations = 0;
  int outerIterations = 0;
  double finalResidual = 0.0;
  std::string termination;
  bool diverged = false;
  double wallClock = 0.0;
  std::optional<double> psnr;
  std::optional<double> ssim;
};

struct RunOptions {
  int trials = 1;
  std::uint64_t masterSeed = 0;
  /// Worker threads; results do not depend on it.
  int jobs = 1;
};

/// Runs every solver on `trials` instances per cell. Instance seeds depend
/// only on (masterSeed, cell, trial), so solvers see identical instances.
/// Records are ordered by (cell, trial, solver). Divergence fails the trial.
std::vector<TrialRecord> runCells(const std::vector<SyntheticSpec>& cells,
                                  const std::vector<SolverSetup>& solvers,
                                  const RunOptions& opts);

std::vector<TrialRecord> runRecoveryFrequency(const std::vector<Index>& ranks,
                                              const SyntheticSpec& base,
                                              const std::vector<SolverSetup>& solvers,
                                              const RunOptions& opts);

std::vector<TrialRecord> runNoiseSweep(const std::vector<double>& sigmas,
                                       const SyntheticSpec& base,
                                       const std::vector<SolverSetup>& solvers,
                                       const RunOptions& opts);

struct GridReport {
  std::vector<Index> ranks;
  std::vector<double> ratios;
  /// fraction[i * ratios.size() + j] for (ranks[i], ratios[j]).
  std::vector<double> fraction;
  int trials = 0;
  std::uint64_t masterSeed = 0;
  std::vector<TrialRecord> records;

  double at(std::size_t rankIdx, std::size_t ratioIdx) const {
    return fraction[rankIdx * ratios.size() + ratioIdx];
  }
};

GridReport runPhaseTransition(const std::vector<Index>& ranks, const std::vector<double>& ratios,
                              const SyntheticSpec& base, const SolverSetup& solver,
                              const RunOptions& opts);

struct CellSummary {
  std::size_t cell = 0;
  SyntheticSpec spec;
  std::string solver;
  int trials = 0;
  double successFraction = 0.0;
  double meanRelativeError = 0.0;
  double meanGradientEvaluations = 0.0;
  int diverged = 0;
};

/// Per (cell, solver) aggregates, in record order.
std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records);

/// 10 log10(peak^2 / MSE); +infinity when the images agree.
double psnr(const Matrix& reference, const Matrix& estimate, double peak);
/// Mean local SSIM, 11 x 11 Gaussian window (sigma 1.5) over every fully
/// contained window position.
double ssim(const Matrix& reference, const Matrix& estimate, double peak);

enum class ChannelMode { Luminance, PerChannel };

struct ImageTask {
  PixmapImage source;
  double observedFraction = 0.5;
  std::uint64_t maskSeed = 0;
  Index rank = 30;
  ChannelMode mode = ChannelMode::Luminance;

  void validate() const;
};

struct ImageResult {
  PixmapImage restored;
  /// Against the source channel(s) the solver saw (luminance in that mode).
  double psnr = 0.0;
  double ssim = 0.0;
  std::vector<RecoveryResult> channels;
};

/// Channel planes as matrices (rows = height) with values in [0, 255].
std::vector<Matrix> imagePlanes(const PixmapImage& img, ChannelMode mode);
/// BT.601 luma.
Matrix luminance(const PixmapImage& img);

ImageResult imageComplete(const ImageTask& task, const SolverSetup& solver);

}  // namespace lowrank::experiments
