#pragma once

// Command pipelines behind the CLI. Each command computes everything first
// and returns its output files; run_command then writes them atomically
// together with manifest.json.

#include <string>
#include <utility>
#include <vector>

#include "vcdf/config.hpp"
#include "vcdf/dataset.hpp"
#include "vcdf/inference.hpp"

namespace vcdf {

struct CommandOutput {
  /// (file name inside cfg.out, content), in write order.
  std::vector<std::pair<std::string, std::string>> files;
};

const std::vector<std::string>& command_names();

CommandOutput cmd_fit(const RunConfig& cfg);
CommandOutput cmd_test(const RunConfig& cfg);
CommandOutput cmd_band(const RunConfig& cfg);
CommandOutput cmd_simulate(const RunConfig& cfg);
CommandOutput cmd_power(const RunConfig& cfg);
CommandOutput cmd_coverage(const RunConfig& cfg);
CommandOutput cmd_bias(const RunConfig& cfg);
CommandOutput cmd_missing(const RunConfig& cfg);

/// Validates `cfg`, runs `command` and writes its files plus manifest.json.
/// Returns the paths written.
std::vector<std::string> run_command(const std::string& command, const RunConfig& cfg);

/// Hypothesis from the config: named covariate columns, or a CSV whose
/// columns are the q r entries of C (row-major vec order) followed by b0.
LinearHypothesis config_hypothesis(const RunConfig& cfg, const TractDataset& data);

/// Two comment lines carried by every CSV: command and config hash + seed.
std::vector<std::string> provenance(const std::string& command, const RunConfig& cfg);

}  // namespace vcdf
