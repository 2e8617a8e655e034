#pragma once

// Run configuration shared by every command. Loaded from JSON, overridden
// from the command line, validated once, and echoed into every output.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcdf/covariance.hpp"
#include "vcdf/kernel.hpp"
#include "vcdf/model.hpp"
#include "vcdf/simulation.hpp"

namespace vcdf {

struct SimulationConfig {
  bool paper_scale = false;
  int subjects = 50;
  int points = 30;
  double length = 100.0;
  double c = 1.0;
  std::vector<double> c_values{0.0, 0.5, 1.0};
  int replicates = 200;
  double deviation_scale = 0.1;
  double deviation_length = 0.2;
  double error_scale = 0.1;
  double age_effect = 0.04;
  double group_probability = 0.375;
  std::vector<std::string> pipelines{"tensor", "fa", "md", "fa_md"};
  /// Replicate index drawn by `simulate`.
  std::uint64_t replicate = 0;
};

struct RunConfig {
  std::string input;
  std::string out = "vcdf-out";
  int threads = 0;
  std::uint64_t seed = 20130501;
  int G = 200;
  std::vector<double> alpha{0.05, 0.01};
  KernelType kernel = KernelType::Epanechnikov;

  std::optional<double> h1, h2, h3;
  std::vector<double> h1_grid, h2_grid, h3_grid;
  bool error_covariance = true;
  CovarianceDivisor divisor = CovarianceDivisor::NMinus6;
  bool gcv_grid_normalization = false;
  bool restudentize = true;

  /// Covariate names whose whole coefficient column is tested against zero.
  std::vector<std::string> test_covariates;
  /// CSV with columns of C followed by b0, one row per constraint.
  std::string hypothesis_file;

  double band_shrink = 1.0 / 6.0;
  /// Covariate vectors for tensor-valued bands; empty uses the mean
  /// covariate vector (simulation studies: group 1 and group 0 at mean age).
  std::vector<std::vector<double>> band_z;

  SimulationConfig simulation;

  void validate() const;
  ModelOptions model_options() const;
  SimulationScenario scenario() const;
};

/// n = 96, n_G = 112, G = 1000 and 3000 replicates.
void use_paper_scale(RunConfig& cfg);

Pipeline parse_pipeline(const std::string& name);

nlohmann::json to_json(const RunConfig& cfg);
/// Unknown keys and wrongly typed values throw ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// FNV-1a 64 of the canonical JSON with `threads` and `out` removed.
std::uint64_t config_hash(const RunConfig& cfg);
std::string hex64(std::uint64_t v);

}  // namespace vcdf
