#pragma once

// Synthetic tract datasets and the Monte Carlo experiment families: power
// of the global test, bias of tensor versus scalar smoothing, band
// coverage, and the cost of a missing covariate.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vcdf/dataset.hpp"
#include "vcdf/estimation.hpp"
#include "vcdf/model.hpp"

namespace vcdf {

/// Coefficients, deviation and error curves taken from a previous fit.
struct FittedSource {
  Grid grid;
  std::vector<Eigen::MatrixXd> B;    // 6 x r per grid point
  std::vector<Eigen::MatrixXd> u;    // n_G x 6 per source subject
  std::vector<Eigen::MatrixXd> eps;  // n_G x 6 per source subject
  Eigen::MatrixXd covariates;        // source subjects x r
  int tested_column = 2;
};

struct SimulationScenario {
  int subjects = 50;
  int points = 30;
  double length = 100.0;
  /// Multiplier on the tested (age) coefficient column.
  double c = 1.0;
  std::uint64_t seed = 20130501;
  /// Built-in family: standard deviation and correlation length (fraction
  /// of the tract) of the Gaussian-process deviations, and the per-point
  /// error standard deviation, all on the log-tensor scale.
  double deviation_scale = 0.1;
  double deviation_length = 0.2;
  double error_scale = 0.1;
  double group_probability = 0.375;
  /// Size of the age column at c = 1.
  double age_effect = 0.04;
  std::optional<FittedSource> source;

  Grid grid() const;
  void validate() const;
};

/// Full-size defaults (n = 96, n_G = 112).
SimulationScenario paper_scale_scenario();

/// Scenario replaying a fitted model's coefficients and residual curves.
SimulationScenario scenario_from_fit(const TractDataset& data, const ModelFit& fit, int tested_column,
                                     std::uint64_t seed);

/// Covariates (1, group, standardized age), fixed for the scenario seed.
Eigen::MatrixXd scenario_covariates(const SimulationScenario& scn);
std::vector<std::string> scenario_covariate_names();

/// True B(x_j), 6 x 3 at each grid point, with c applied.
std::vector<Eigen::MatrixXd> true_coefficients(const SimulationScenario& scn);

/// S_i(x_j) = exp(Ivecs(B(x_j) z_i + tau_i u_i(x_j) + tau_ij eps_i(x_j))).
/// `replicate` selects an independent draw of the noise.
TractDataset generate_dataset(const SimulationScenario& scn, std::uint64_t replicate = 0);

/// MAB_j = n^{-1} sum_i |mean_s est_s(i, j) - truth(i, j)|; estimates are
/// n x n_G matrices, one per replicate.
Eigen::VectorXd mab(const std::vector<Eigen::MatrixXd>& estimates, const Eigen::MatrixXd& truth);

enum class Pipeline { Tensor, FA, MD, FAandMD };
std::string pipeline_name(Pipeline p);
FunctionalResponse pipeline_response(const TractDataset& data, Pipeline p);

struct StudyOptions {
  int replicates = 200;
  int G = 200;
  int threads = 0;
  bool restudentize = true;
  ModelOptions model;
};

struct PowerCell {
  Pipeline pipeline;
  double c = 0.0;
  double alpha = 0.0;
  double rate = 0.0;
  int replicates = 0;
  int failures = 0;
};

struct PowerResult {
  std::vector<PowerCell> cells;
  /// p[c index][pipeline index][replicate]; NaN marks a failed replicate.
  std::vector<std::vector<std::vector<double>>> p_values;
  std::vector<Pipeline> pipelines;
  std::vector<double> c_values;
  double seconds = 0.0;

  double rate(Pipeline p, double c, double alpha) const;
};

PowerResult run_power_study(const SimulationScenario& scn, const std::vector<double>& c_values,
                            const std::vector<double>& alphas, const StudyOptions& options,
                            const std::vector<Pipeline>& pipelines = {Pipeline::Tensor, Pipeline::FA, Pipeline::MD,
                                                                      Pipeline::FAandMD});

struct BiasResult {
  std::vector<double> x;
  Eigen::VectorXd fa_tensor;  // method A
  Eigen::VectorXd fa_scalar;  // method B
  Eigen::VectorXd md_tensor;
  Eigen::VectorXd md_scalar;
  int replicates = 0;
  double seconds = 0.0;
};

/// Method A smooths tensors and derives FA/MD from the fitted tensors;
/// method B derives FA/MD per raw tensor and smooths the scalars.
BiasResult run_bias_study(const SimulationScenario& scn, const StudyOptions& options);

struct CoverageCell {
  std::string target;  // "beta_k_l" or "spd_<m>"
  int k = -1;
  int l = -1;
  double alpha = 0.0;
  double coverage = 0.0;
  int replicates = 0;
};

struct CoverageResult {
  std::vector<CoverageCell> cells;
  std::vector<Eigen::VectorXd> z_vectors;
  int failures = 0;
  double seconds = 0.0;
};

/// Simultaneous coverage for every coefficient and for the SPD curve at
/// each z in `z_vectors` (default: group 1 and group 0 at mean age).
CoverageResult run_coverage_study(const SimulationScenario& scn, const std::vector<double>& alphas,
                                  const StudyOptions& options, double band_shrink = 1.0 / 6.0,
                                  std::vector<Eigen::VectorXd> z_vectors = {});

struct MissingCovariateResult {
  std::vector<double> x;
  Eigen::VectorXd full;     // mean geodesic distance, full model
  Eigen::VectorXd reduced;  // without the tested covariate
  double mean_difference = 0.0;  // full - reduced, averaged over the grid
  double ci_low = 0.0;
  double ci_high = 0.0;
  double fraction_full_smaller = 0.0;
  int replicates = 0;
  double seconds = 0.0;
};

MissingCovariateResult run_missing_covariate_study(const SimulationScenario& scn, const StudyOptions& options);

}  // namespace vcdf
