#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lowrank/experiments.hpp"
#include "lowrank/solvers.hpp"

namespace lowrank {

enum class StepKind { BarzilaiBorwein, Fixed, TheoryGuided };

/// Every tunable of the command-line front end. Defaults suit 50 x 50
/// completion with minibatches of m/25.
struct RunConfig {
  // problem
  Index n1 = 50;
  Index n2 = 50;
  Index rank = 4;
  double ratio = 0.5;
  double sigma = 0.0;
  // solver
  std::string solver = "svrg";
  std::vector<std::string> solvers{"svrg"};
  int outer = 150;
  /// 0 selects m / batch (one expected pass per outer iteration).
  int inner = 0;
  /// 0 selects m / 25.
  Index batch = 0;
  double tolerance = 1e-8;
  StepKind step = StepKind::BarzilaiBorwein;
  /// Fixed step, or the BB first step (0 = automatic).
  double eta = 0.0;
  double clampMin = 1e-6;
  /// 0 selects 1 / inner.
  double clampMax = 0.0;
  double delta = 0.0;
  double placement = 0.5;
  InitKind init = InitKind::Zero;
  double svtTau = 0.0;
  double svtDelta = 0.0;
  bool svtKick = true;
  // sweeps
  int trials = 20;
  std::vector<Index> ranks{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<double> ratios{0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> sigmas{0.0, 0.1, 0.2, 0.3, 0.4};
  // images
  double observed = 0.5;
  Index imageRank = 30;
  experiments::ChannelMode channel = experiments::ChannelMode::Luminance;

  /// Applies one `key = value` assignment. Throws ErrorKind::Parse naming the
  /// key on an unknown key, malformed or out-of-range value.
  void set(std::string_view key, std::string_view value);
  /// Resolved values in a fixed order, formatted as they would be parsed.
  std::vector<std::pair<std::string, std::string>> entries() const;

  /// Solver setup for measurement count m (resolves the automatic fields).
  experiments::SolverSetup solverSetup(const std::string& name, Index m) const;
  experiments::SyntheticSpec syntheticSpec() const;
};

/// Parses `key = value` lines with `#` comments onto `cfg`. Errors carry the
/// line number and key.
void parseConfig(std::string_view text, RunConfig& cfg);

/// "1..10", "1,2,5" or a mix; "0:0.1:0.4" as start:step:stop.
std::vector<Index> parseIndexList(std::string_view text);
std::vector<double> parseRealList(std::string_view text);

}  // namespace lowrank
