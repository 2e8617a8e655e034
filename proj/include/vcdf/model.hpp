#pragma once

// Full model fit: coefficients with CV1-selected h1, deviation curves with
// GCV-selected h2, Sigma_u and optionally Sigma_eps with CV2-selected h3.

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "vcdf/covariance.hpp"
#include "vcdf/dataset.hpp"
#include "vcdf/estimation.hpp"

namespace vcdf {

struct ModelOptions {
  EstimationOptions estimation;
  CovarianceOptions covariance;
  /// Fixed bandwidths skip the corresponding search.
  std::optional<double> h1, h2, h3;
  /// Empty means the default log-spaced grid.
  std::vector<double> h1_candidates, h2_candidates, h3_candidates;
  bool estimate_error_covariance = true;
};

struct ModelFit {
  CoefficientField field;  // on the data grid
  BandwidthSelection h1;
  BandwidthSelection h2;
  BandwidthSelection h3;  // empty when the error covariance was skipped
  std::vector<Eigen::MatrixXd> residuals;
  DeviationField deviations;
  std::vector<Eigen::MatrixXd> errors;
  CovarianceField covariance;
  Eigen::MatrixXd omega_z;  // n^{-1} Z^T Z
  int ridge_events = 0;
};

ModelFit fit_model(const FunctionalResponse& data, const ModelOptions& options = {});

/// Selection record for a fixed bandwidth.
BandwidthSelection fixed_bandwidth(double h);

}  // namespace vcdf
