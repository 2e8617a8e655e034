#include "vcdf/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace vcdf {

namespace {

Eigen::MatrixXd build_smoother(const Grid& grid, double h, KernelType kernel) { return smoother_matrix(grid, h, kernel).entries; }

void check_residuals(const std::vector<Eigen::MatrixXd>& residuals, const Grid& grid) {
  if (residuals.empty()) throw Error(ErrorCode::ShapeMismatch, "no residual curves");
  for (const auto& r : residuals)
    if (r.rows() != grid.size() || r.cols() != residuals.front().cols())
      throw Error(ErrorCode::ShapeMismatch, "residual curve has wrong shape");
}

double mean_squared(const std::vector<Eigen::MatrixXd>& curves) {
  double sum = 0.0, count = 0.0;
  for (const auto& c : curves) {
    sum += c.squaredNorm();
    count += static_cast<double>(c.rows());
  }
  return count > 0 ? sum / count : 0.0;
}

// Kernel weights normalized to unit mass at each grid point (row j).
Eigen::MatrixXd normalized_kernel(const Grid& grid, double h3, KernelType kernel) {
  const int ng = grid.size();
  Eigen::MatrixXd w(ng, ng);
  for (int j = 0; j < ng; ++j) {
    for (int k = 0; k < ng; ++k) w(j, k) = kernel_weight(grid[k] - grid[j], h3, kernel);
    const double mass = w.row(j).sum();
    if (!(mass > 0.0)) throw Error(ErrorCode::EmptyWindow, "no kernel mass at x=" + std::to_string(grid[j]));
    w.row(j) /= mass;
  }
  return w;
}

}  // namespace

double covariance_divisor(int subjects, const CovarianceOptions& options) {
  const int d = options.divisor == CovarianceDivisor::NMinus6 ? subjects - 6 : subjects - 1;
  if (d <= 0) throw Error(ErrorCode::TooFewSubjects, "need more subjects for the covariance divisor (n=" + std::to_string(subjects) + ")");
  return d;
}

std::vector<Eigen::MatrixXd> residual_matrix(const FunctionalResponse& data, const CoefficientField& field) {
  data.validate();
  const auto pts = data.grid.points();
  if (field.x.size() != pts.size() || !std::equal(pts.begin(), pts.end(), field.x.begin())) {
    throw Error(ErrorCode::GridMismatch, "coefficient field is not evaluated on the data grid");
  }
  std::vector<Eigen::MatrixXd> out(data.values.size());
  for (int i = 0; i < data.subjects(); ++i) {
    const Eigen::VectorXd z = data.covariates.row(i).transpose();
    auto& r = out[static_cast<std::size_t>(i)];
    r = data.values[static_cast<std::size_t>(i)];
    for (int j = 0; j < data.points(); ++j) r.row(j) -= (field.B[static_cast<std::size_t>(j)] * z).transpose();
  }
  return out;
}

DeviationField smooth_deviations(const std::vector<Eigen::MatrixXd>& residuals, const Grid& grid, double h2,
                                 KernelType kernel) {
  check_residuals(residuals, grid);
  const Eigen::MatrixXd s = build_smoother(grid, h2, kernel);
  DeviationField dev{{}, Eigen::MatrixXd::Zero(grid.size(), residuals.front().cols()), h2};
  dev.u_hat.reserve(residuals.size());
  for (const auto& r : residuals) {
    dev.u_hat.push_back(s * r);
    dev.u_mean += dev.u_hat.back();
  }
  dev.u_mean /= static_cast<double>(residuals.size());
  return dev;
}

double gcv_score(const std::vector<Eigen::MatrixXd>& residuals, const Grid& grid, double h2,
                 const CovarianceOptions& options) {
  check_residuals(residuals, grid);
  const Eigen::MatrixXd s = build_smoother(grid, h2, options.kernel);
  const double n = static_cast<double>(residuals.size());
  const double norm = options.gcv_grid_normalization ? grid.size() : n;
  const double ratio = s.trace() / norm;
  if (!(ratio < 1.0)) throw Error(ErrorCode::DegenerateDenominator, "normalized smoother trace reaches 1");
  double num = 0.0;
  for (const auto& r : residuals) num += (r - s * r).squaredNorm();
  return num / n / ((1.0 - ratio) * (1.0 - ratio));
}

BandwidthSelection select_h2(const std::vector<Eigen::MatrixXd>& residuals, const Grid& grid,
                             std::vector<double> candidates, const CovarianceOptions& options) {
  return select_bandwidth(
      std::move(candidates), [&](double h) { return gcv_score(residuals, grid, h, options); },
      1e-20 * (1.0 + mean_squared(residuals)));
}

Eigen::MatrixXd estimate_sigma_u(const DeviationField& dev, const CovarianceOptions& options) {
  const double divisor = covariance_divisor(dev.subjects(), options);
  const auto ng = dev.u_mean.rows();
  const auto q = dev.u_mean.cols();
  // Column i stacks u_i(x_1), ..., u_i(x_nG).
  Eigen::MatrixXd w(ng * q, dev.subjects());
  for (int i = 0; i < dev.subjects(); ++i) {
    const auto& u = dev.u_hat[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < ng; ++j) w.block(j * q, i, q, 1) = u.row(j).transpose();
  }
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(ng * q, ng * q);
  sigma.selfadjointView<Eigen::Lower>().rankUpdate(w, 1.0 / divisor);
  return sigma.selfadjointView<Eigen::Lower>();
}

std::vector<Eigen::MatrixXd> error_residuals(const std::vector<Eigen::MatrixXd>& residuals,
                                             const DeviationField& dev) {
  if (residuals.size() != dev.u_hat.size()) throw Error(ErrorCode::ShapeMismatch, "subject counts differ");
  std::vector<Eigen::MatrixXd> out(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) out[i] = residuals[i] - dev.u_hat[i];
  return out;
}

std::vector<Eigen::MatrixXd> estimate_sigma_eps(const std::vector<Eigen::MatrixXd>& errors, const Grid& grid,
                                                double h3, const CovarianceOptions& options) {
  check_residuals(errors, grid);
  const double divisor = covariance_divisor(static_cast<int>(errors.size()), options);
  const Eigen::MatrixXd w = normalized_kernel(grid, h3, options.kernel);
  const auto q = errors.front().cols();
  const int ng = grid.size();
  std::vector<Eigen::MatrixXd> pointwise(static_cast<std::size_t>(ng), Eigen::MatrixXd::Zero(q, q));
  for (const auto& e : errors)
    for (int k = 0; k < ng; ++k) pointwise[static_cast<std::size_t>(k)] += e.row(k).transpose() * e.row(k);
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(ng), Eigen::MatrixXd::Zero(q, q));
  for (int j = 0; j < ng; ++j) {
    for (int k = 0; k < ng; ++k)
      if (w(j, k) != 0.0) out[static_cast<std::size_t>(j)] += w(j, k) * pointwise[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(j)] /= divisor;
  }
  return out;
}

Eigen::MatrixXd ridge_inverse(const Eigen::MatrixXd& m, ErrorCode on_zero, bool* ridged) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  const double tr = sym.trace();
  if (ridged) *ridged = false;
  if (!(tr > 0.0)) throw Error(on_zero, "matrix has zero trace");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd values = es.eigenvalues();
  const double hi = values.maxCoeff(), lo = values.minCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    values = values.cwiseMax(0.0);
    values.array() += 1e-10 * tr / static_cast<double>(sym.rows());
    if (ridged) *ridged = true;
    if (!(values.minCoeff() > 0.0)) throw Error(on_zero, "matrix is not positive semidefinite");
  }
  return es.eigenvectors() * values.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd psd_clip(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
}

Cv2Score cv2_score(const std::vector<Eigen::MatrixXd>& errors, const Grid& grid, double h3,
                   const CovarianceOptions& options) {
  check_residuals(errors, grid);
  const int n = static_cast<int>(errors.size());
  const double divisor = covariance_divisor(n, options);
  if (n < 2) throw Error(ErrorCode::TooFewSubjects, "leave-one-out needs two subjects");
  const Eigen::MatrixXd w = normalized_kernel(grid, h3, options.kernel);
  const auto q = errors.front().cols();
  const int ng = grid.size();

  // Outer products per subject and point, and their totals over subjects.
  std::vector<Eigen::MatrixXd> total(static_cast<std::size_t>(ng), Eigen::MatrixXd::Zero(q, q));
  for (const auto& e : errors)
    for (int k = 0; k < ng; ++k) total[static_cast<std::size_t>(k)] += e.row(k).transpose() * e.row(k);

  Cv2Score out;
  std::vector<Eigen::MatrixXd> normalizer_inv(static_cast<std::size_t>(ng));
  for (int j = 0; j < ng; ++j) {
    bool ridged = false;
    normalizer_inv[static_cast<std::size_t>(j)] =
        ridge_inverse(total[static_cast<std::size_t>(j)] / divisor, ErrorCode::SingularNormalizer, &ridged);
    if (ridged) ++out.ridge_events;
  }

  std::vector<Eigen::MatrixXd> smoothed_total(static_cast<std::size_t>(ng), Eigen::MatrixXd::Zero(q, q));
  for (int j = 0; j < ng; ++j)
    for (int k = 0; k < ng; ++k)
      if (w(j, k) != 0.0) smoothed_total[static_cast<std::size_t>(j)] += w(j, k) * total[static_cast<std::size_t>(k)];

  double sum = 0.0;
  Eigen::MatrixXd own(q, q), diff(q, q);
  for (const auto& e : errors) {
    for (int j = 0; j < ng; ++j) {
      own.setZero();
      for (int k = 0; k < ng; ++k)
        if (w(j, k) != 0.0) own.noalias() += w(j, k) * e.row(k).transpose() * e.row(k);
      diff = e.row(j).transpose() * e.row(j) - (smoothed_total[static_cast<std::size_t>(j)] - own) / (n - 1.0);
      sum += (diff * diff * normalizer_inv[static_cast<std::size_t>(j)]).trace();
    }
  }
  out.score = sum / (static_cast<double>(n) * ng);
  return out;
}

BandwidthSelection select_h3(const std::vector<Eigen::MatrixXd>& errors, const Grid& grid,
                             std::vector<double> candidates, const CovarianceOptions& options) {
  return select_bandwidth(
      std::move(candidates), [&](double h) { return cv2_score(errors, grid, h, options).score; },
      1e-20 * (1.0 + mean_squared(errors)));
}

}  // namespace vcdf
