#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lowrank/experiments.hpp"
#include "lowrank/solvers.hpp"

namespace lowrank {

/// 17 significant digits (round-trip exact); "inf", "-inf", "nan" otherwise.
std::string formatReal(double v);
/// RFC-4180 field quoting: fields with comma, quote, CR or LF are wrapped in
/// quotes with inner quotes doubled.
std::string csvField(std::string_view s);

struct CsvTable {
  /// Written first as "# key = value" lines.
  std::vector<std::pair<std::string, std::string>> preamble;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// LF line endings throughout. Throws ErrorKind::InvalidInput when a row
/// width differs from the header.
std::string writeCsv(const CsvTable& table);
/// Writes to `path`; throws ErrorKind::Io naming the path on failure.
void saveCsv(const std::string& path, const CsvTable& table);

CsvTable traceTable(const SolveTrace& trace);
CsvTable recordTable(const std::vector<experiments::TrialRecord>& records);
CsvTable summaryTable(const std::vector<experiments::CellSummary>& cells);
CsvTable gridTable(const experiments::GridReport& grid);

}  // namespace lowrank
