#include "lowrank/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "lowrank/error.hpp"

namespace lowrank {

std::string formatReal(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csvField(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string writeCsv(const CsvTable& table) {
  std::string out;
  for (const auto& [k, v] : table.preamble) out += "# " + k + " = " + v + "\n";
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csvField(fields[i]);
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      fail(ErrorKind::InvalidInput, "csv: row width does not match header");
    line(row);
  }
  return out;
}

void saveCsv(const std::string& path, const CsvTable& table) {
  const std::string bytes = writeCsv(table);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed: " + path);
}

namespace {

std::string optionalReal(const std::optional<double>& v) { return v ? formatReal(*v) : ""; }

}  // namespace

CsvTable traceTable(const SolveTrace& trace) {
  CsvTable t;
  t.header = {"iteration", "residual", "objective", "relative_error", "step",
              "gradient_evaluations", "rank"};
  for (const auto& r : trace.rows)
    t.rows.push_back({std::to_string(r.iteration), formatReal(r.residual),
                      formatReal(r.objective), optionalReal(r.relativeError), formatReal(r.step),
                      std::to_string(r.gradientEvaluations), std::to_string(r.rank)});
  return t;
}

CsvTable recordTable(const std::vector<experiments::TrialRecord>& records) {
  CsvTable t;
  t.header = {"cell",     "trial",          "n1",         "n2",
              "rank",     "sample_ratio",   "noise_sigma", "seed",
              "solver",   "success",        "relative_error", "gradient_evaluations",
              "outer_iterations", "final_residual", "termination", "psnr", "ssim"};
  for (const auto& r : records)
    t.rows.push_back({std::to_string(r.cell), std::to_string(r.trial), std::to_string(r.spec.n1),
                      std::to_string(r.spec.n2), std::to_string(r.spec.rank),
                      formatReal(r.spec.sampleRatio), formatReal(r.spec.noiseSigma),
                      std::to_string(r.spec.seed), r.solver, r.success ? "1" : "0",
                      formatReal(r.relativeError), std::to_string(r.gradientEvaluations),
                      std::to_string(r.outerIterations), formatReal(r.finalResidual),
                      r.termination, optionalReal(r.psnr), optionalReal(r.ssim)});
  return t;
}

CsvTable summaryTable(const std::vector<experiments::CellSummary>& cells) {
  CsvTable t;
  t.header = {"cell",   "n1",     "n2",     "rank",  "sample_ratio", "noise_sigma",
              "solver", "trials", "success_fraction", "mean_relative_error",
              "mean_gradient_evaluations", "diverged"};
  for (const auto& c : cells)
    t.rows.push_back({std::to_string(c.cell), std::to_string(c.spec.n1),
                      std::to_string(c.spec.n2), std::to_string(c.spec.rank),
                      formatReal(c.spec.sampleRatio), formatReal(c.spec.noiseSigma), c.solver,
                      std::to_string(c.trials), formatReal(c.successFraction),
                      formatReal(c.meanRelativeError), formatReal(c.meanGradientEvaluations),
                      std::to_string(c.diverged)});
  return t;
}

CsvTable gridTable(const experiments::GridReport& grid) {
  CsvTable t;
  t.header = {"rank", "sample_ratio", "trials", "success_fraction"};
  for (std::size_t i = 0; i < grid.ranks.size(); ++i)
    for (std::size_t j = 0; j < grid.ratios.size(); ++j)
      t.rows.push_back({std::to_string(grid.ranks[i]), formatReal(grid.ratios[j]),
                        std::to_string(grid.trials), formatReal(grid.at(i, j))});
  return t;
}

}  // namespace lowrank
