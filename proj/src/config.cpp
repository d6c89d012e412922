#include "lowrank/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "lowrank/csv.hpp"
#include "lowrank/error.hpp"

namespace lowrank {

namespace {

std::string_view trim(std::string_view s) {
  const auto notSpace = [](char c) { return c != ' ' && c != '\t' && c != '\r'; };
  while (!s.empty() && !notSpace(s.front())) s.remove_prefix(1);
  while (!s.empty() && !notSpace(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  return out;
}

[[noreturn]] void bad(std::string_view what) { fail(ErrorKind::Parse, std::string(what)); }

long long toInteger(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    bad("malformed integer '" + std::string(s) + "'");
  return v;
}

double toReal(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    bad("malformed number '" + std::string(s) + "'");
  return v;
}

bool toBool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad("malformed boolean '" + std::string(s) + "'");
}

void require(bool ok, std::string_view what) {
  if (!ok) bad(std::string("out of range: ") + std::string(what));
}

template <class T>
std::string joinList(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += formatReal(v[i]);
    else if constexpr (std::is_integral_v<T>)
      out += std::to_string(v[i]);
    else
      out += v[i];
  }
  return out;
}

const char* stepName(StepKind k) {
  switch (k) {
    case StepKind::BarzilaiBorwein: return "bb";
    case StepKind::Fixed: return "fixed";
    case StepKind::TheoryGuided: return "theory";
  }
  return "bb";
}

}  // namespace

std::vector<Index> parseIndexList(std::string_view text) {
  std::vector<Index> out;
  for (std::string_view part : split(text, ',')) {
    if (part.empty()) bad("empty list element");
    const auto dots = part.find("..");
    if (dots != std::string_view::npos) {
      const long long lo = toInteger(part.substr(0, dots));
      const long long hi = toInteger(part.substr(dots + 2));
      if (hi < lo) bad("descending range '" + std::string(part) + "'");
      if (hi - lo > 100000) bad("range too long");
      for (long long v = lo; v <= hi; ++v) out.push_back(static_cast<Index>(v));
    } else {
      out.push_back(static_cast<Index>(toInteger(part)));
    }
  }
  return out;
}

std::vector<double> parseRealList(std::string_view text) {
  std::vector<double> out;
  for (std::string_view part : split(text, ',')) {
    if (part.empty()) bad("empty list element");
    const auto fields = split(part, ':');
    if (fields.size() == 1) {
      out.push_back(toReal(part));
    } else if (fields.size() == 3) {
      const double lo = toReal(fields[0]), step = toReal(fields[1]), hi = toReal(fields[2]);
      if (!(step > 0.0) || hi < lo) bad("bad range '" + std::string(part) + "'");
      const auto count = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
      if (count > 100000) bad("range too long");
      // Multiplying avoids accumulating rounding in the grid points.
      for (long long i = 0; i <= count; ++i) out.push_back(lo + static_cast<double>(i) * step);
    } else {
      bad("malformed range '" + std::string(part) + "'");
    }
  }
  return out;
}

void RunConfig::set(std::string_view rawKey, std::string_view rawValue) {
  const std::string key(trim(rawKey));
  const std::string_view value = trim(rawValue);
  try {
    if (key == "n1") {
      n1 = toInteger(value);
      require(n1 >= 1, "n1 >= 1");
    } else if (key == "n2") {
      n2 = toInteger(value);
      require(n2 >= 1, "n2 >= 1");
    } else if (key == "rank") {
      rank = toInteger(value);
      require(rank >= 1, "rank >= 1");
    } else if (key == "ratio") {
      ratio = toReal(value);
      require(ratio > 0.0 && ratio <= 1.0, "ratio in (0, 1]");
    } else if (key == "sigma") {
      sigma = toReal(value);
      require(sigma >= 0.0, "sigma >= 0");
    } else if (key == "solver") {
      parseSolverKind(std::string(value));
      solver = value;
    } else if (key == "solvers") {
      std::vector<std::string> names;
      for (auto part : split(value, ',')) {
        parseSolverKind(std::string(part));
        names.emplace_back(part);
      }
      require(!names.empty(), "at least one solver");
      solvers = std::move(names);
    } else if (key == "outer") {
      outer = static_cast<int>(toInteger(value));
      require(outer >= 1, "outer >= 1");
    } else if (key == "inner") {
      inner = static_cast<int>(toInteger(value));
      require(inner >= 0, "inner >= 0");
    } else if (key == "batch") {
      batch = toInteger(value);
      require(batch >= 0, "batch >= 0");
    } else if (key == "tolerance") {
      tolerance = toReal(value);
      require(tolerance > 0.0, "tolerance > 0");
    } else if (key == "step") {
      if (value == "bb") step = StepKind::BarzilaiBorwein;
      else if (value == "fixed") step = StepKind::Fixed;
      else if (value == "theory") step = StepKind::TheoryGuided;
      else bad("unknown step rule '" + std::string(value) + "'");
    } else if (key == "eta") {
      eta = toReal(value);
      require(eta >= 0.0, "eta >= 0");
    } else if (key == "clamp_min") {
      clampMin = toReal(value);
      require(clampMin > 0.0, "clamp_min > 0");
    } else if (key == "clamp_max") {
      clampMax = toReal(value);
      require(clampMax >= 0.0, "clamp_max >= 0");
    } else if (key == "delta") {
      delta = toReal(value);
      require(delta >= 0.0 && delta < 1.0, "delta in [0, 1)");
    } else if (key == "placement") {
      placement = toReal(value);
      require(placement >= 0.0 && placement <= 1.0, "placement in [0, 1]");
    } else if (key == "init") {
      if (value == "zero") init = InitKind::Zero;
      else if (value == "spectral") init = InitKind::SpectralOneStep;
      else bad("unknown init '" + std::string(value) + "'");
    } else if (key == "svt_tau") {
      svtTau = toReal(value);
      require(svtTau >= 0.0, "svt_tau >= 0");
    } else if (key == "svt_delta") {
      svtDelta = toReal(value);
      require(svtDelta >= 0.0, "svt_delta >= 0");
    } else if (key == "svt_kick") {
      svtKick = toBool(value);
    } else if (key == "trials") {
      trials = static_cast<int>(toInteger(value));
      require(trials >= 1, "trials >= 1");
    } else if (key == "ranks") {
      auto v = parseIndexList(value);
      require(!v.empty() && std::all_of(v.begin(), v.end(), [](Index r) { return r >= 1; }),
              "ranks >= 1");
      ranks = std::move(v);
    } else if (key == "ratios") {
      auto v = parseRealList(value);
      require(!v.empty() && std::all_of(v.begin(), v.end(),
                                        [](double x) { return x > 0.0 && x <= 1.0; }),
              "ratios in (0, 1]");
      ratios = std::move(v);
    } else if (key == "sigmas") {
      auto v = parseRealList(value);
      require(!v.empty() &&
                  std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; }),
              "sigmas >= 0");
      sigmas = std::move(v);
    } else if (key == "observed") {
      observed = toReal(value);
      require(observed > 0.0 && observed <= 1.0, "observed in (0, 1]");
    } else if (key == "image_rank") {
      imageRank = toInteger(value);
      require(imageRank >= 1, "image_rank >= 1");
    } else if (key == "channel") {
      if (value == "luminance") channel = experiments::ChannelMode::Luminance;
      else if (value == "per-channel") channel = experiments::ChannelMode::PerChannel;
      else bad("unknown channel mode '" + std::string(value) + "'");
    } else {
      bad("unknown key");
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Parse && std::string_view(e.what()).starts_with("key '")) throw;
    fail(ErrorKind::Parse, "key '" + key + "': " + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  const auto mode = channel == experiments::ChannelMode::Luminance ? "luminance" : "per-channel";
  return {
      {"n1", std::to_string(n1)},
      {"n2", std::to_string(n2)},
      {"rank", std::to_string(rank)},
      {"ratio", formatReal(ratio)},
      {"sigma", formatReal(sigma)},
      {"solver", solver},
      {"solvers", joinList(solvers)},
      {"outer", std::to_string(outer)},
      {"inner", std::to_string(inner)},
      {"batch", std::to_string(batch)},
      {"tolerance", formatReal(tolerance)},
      {"step", stepName(step)},
      {"eta", formatReal(eta)},
      {"clamp_min", formatReal(clampMin)},
      {"clamp_max", formatReal(clampMax)},
      {"delta", formatReal(delta)},
      {"placement", formatReal(placement)},
      {"init", init == InitKind::Zero ? "zero" : "spectral"},
      {"svt_tau", formatReal(svtTau)},
      {"svt_delta", formatReal(svtDelta)},
      {"svt_kick", svtKick ? "true" : "false"},
      {"trials", std::to_string(trials)},
      {"ranks", joinList(ranks)},
      {"ratios", joinList(ratios)},
      {"sigmas", joinList(sigmas)},
      {"observed", formatReal(observed)},
      {"image_rank", std::to_string(imageRank)},
      {"channel", mode},
  };
}

experiments::SolverSetup RunConfig::solverSetup(const std::string& name, Index m) const {
  experiments::SolverSetup s;
  s.kind = parseSolverKind(name);
  s.label = to_string(s.kind);
  SolverConfig& c = s.config;
  c.outerIterations = outer;
  c.tolerance = tolerance;
  c.init = init;
  c.batchSize = batch > 0 ? std::min(batch, m) : std::max<Index>(1, m / 25);
  c.innerIterations =
      inner > 0 ? inner : static_cast<int>(std::max<Index>(1, m / c.batchSize));
  switch (step) {
    case StepKind::Fixed:
      if (!(eta > 0.0)) fail(ErrorKind::Configuration, "step = fixed requires eta > 0");
      c.step = FixedStep{eta};
      break;
    case StepKind::BarzilaiBorwein: {
      const double hi = clampMax > 0.0 ? clampMax : 1.0 / c.innerIterations;
      c.step = BarzilaiBorweinStep{eta, std::min(clampMin, hi), hi};
      break;
    }
    case StepKind::TheoryGuided:
      c.step = TheoryGuidedStep{delta, placement};
      break;
  }
  s.svt = SvtParams{svtTau, svtDelta, svtKick};
  return s;
}

experiments::SyntheticSpec RunConfig::syntheticSpec() const {
  experiments::SyntheticSpec s;
  s.n1 = n1;
  s.n2 = n2;
  s.rank = rank;
  s.sampleRatio = ratio;
  s.noiseSigma = sigma;
  return s;
}

void parseConfig(std::string_view text, RunConfig& cfg) {
  std::size_t lineNo = 0;
  for (std::string_view line : split(text, '\n')) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorKind::Parse, "line " + std::to_string(lineNo) + ": expected 'key = value'");
    try {
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      fail(ErrorKind::Parse, "line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
}

}  // namespace lowrank
