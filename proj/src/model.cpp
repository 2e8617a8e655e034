#include "vcdf/model.hpp"

#include <cmath>

namespace vcdf {

BandwidthSelection fixed_bandwidth(double h) { return {h, {h}, {std::nan("")}}; }

namespace {

std::vector<double> candidates_or_default(const std::vector<double>& given, const Grid& grid) {
  return given.empty() ? default_bandwidth_candidates(grid) : given;
}

}  // namespace

ModelFit fit_model(const FunctionalResponse& data, const ModelOptions& options) {
  data.validate();
  ModelFit fit;
  fit.h1 = options.h1 ? fixed_bandwidth(*options.h1)
                      : select_h1(data, candidates_or_default(options.h1_candidates, data.grid), options.estimation);
  fit.field = fit_coefficients(data, fit.h1.selected, options.estimation);
  fit.residuals = residual_matrix(data, fit.field);

  fit.h2 = options.h2 ? fixed_bandwidth(*options.h2)
                      : select_h2(fit.residuals, data.grid, candidates_or_default(options.h2_candidates, data.grid),
                                  options.covariance);
  fit.deviations = smooth_deviations(fit.residuals, data.grid, fit.h2.selected, options.covariance.kernel);
  fit.covariance.components = data.components();
  fit.covariance.bandwidth_h2 = fit.h2.selected;
  fit.covariance.sigma_u = estimate_sigma_u(fit.deviations, options.covariance);
  fit.errors = error_residuals(fit.residuals, fit.deviations);

  if (options.estimate_error_covariance) {
    if (options.h3) {
      fit.h3 = fixed_bandwidth(*options.h3);
    } else {
      fit.h3 = select_h3(fit.errors, data.grid, candidates_or_default(options.h3_candidates, data.grid),
                         options.covariance);
      fit.ridge_events += cv2_score(fit.errors, data.grid, fit.h3.selected, options.covariance).ridge_events;
    }
    fit.covariance.bandwidth_h3 = fit.h3.selected;
    fit.covariance.sigma_eps = estimate_sigma_eps(fit.errors, data.grid, fit.h3.selected, options.covariance);
  }
  fit.omega_z = data.covariates.transpose() * data.covariates / static_cast<double>(data.subjects());
  return fit;
}

}  // namespace vcdf
