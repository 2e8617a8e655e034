#pragma once

// Tract files and CSV output.
//
// A tract is a JSON header plus three CSV blocks stored next to it:
//
//   <stem>.json            format, sizes, length, units, covariate names, block names
//   <stem>.grid.csv        x
//   <stem>.covariates.csv  one column per covariate, one row per subject
//   <stem>.tensors.csv     subject,point,a11,a21,a22,a31,a32,a33 (subject-major)
//
// Numbers are written in shortest round-trip form, so save(load(f)) == f
// for files in canonical layout. Lines starting with '#' are comments.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vcdf/dataset.hpp"

namespace vcdf {

inline constexpr std::string_view kTractFormat = "vcdf-tract/1";

/// Shortest decimal string that parses back to exactly `v`.
std::string format_number(double v);

/// Parses a full field as a finite double; throws ParseError naming `where`.
double parse_number(std::string_view text, const std::string& where);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Comma-separated rows with their 1-based line numbers; comment and blank
/// lines are skipped. Fields are not quoted.
struct CsvRecord {
  int line = 0;
  std::vector<std::string> fields;
  std::vector<int> columns;  // 1-based start column of each field
};
std::vector<CsvRecord> parse_csv(std::string_view text);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  /// `comment` lines are emitted first, each prefixed with "# ".
  std::string render(const std::vector<std::string>& comment = {}) const;
};

/// Loads and validates a tract. Throws ParseError (file:line:column),
/// ValidationError (the violated invariant) or NotPositiveDefinite (subject
/// and point).
TractDataset load_tract(const std::filesystem::path& header);

/// (file name, content) for the three blocks and the header `<stem>.json`,
/// header last.
std::vector<std::pair<std::string, std::string>> render_tract(const TractDataset& data, const std::string& stem);

/// Writes the header at `header` and the blocks beside it.
void save_tract(const TractDataset& data, const std::filesystem::path& header);

}  // namespace vcdf
