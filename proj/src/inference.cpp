#include "vcdf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "vcdf/random.hpp"
#include "vcdf/spd.hpp"

namespace vcdf {

Eigen::VectorXd vec_rows(const Eigen::MatrixXd& b) {
  Eigen::VectorXd out(b.size());
  for (Eigen::Index k = 0; k < b.rows(); ++k)
    for (Eigen::Index l = 0; l < b.cols(); ++l) out[k * b.cols() + l] = b(k, l);
  return out;
}

void LinearHypothesis::validate(int components, int covariates) const {
  const int dim = components * covariates;
  if (C.cols() != dim) {
    throw Error(ErrorCode::ValidationError,
                "hypothesis matrix has " + std::to_string(C.cols()) + " columns, expected " + std::to_string(dim));
  }
  if (C.rows() < 1 || C.rows() > dim) throw Error(ErrorCode::ValidationError, "hypothesis matrix has bad row count");
  if (b0.size() != C.rows()) throw Error(ErrorCode::ValidationError, "b0 length does not match hypothesis rows");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
  const auto& s = svd.singularValues();
  if (!(s[s.size() - 1] > 1e-10 * s[0])) throw Error(ErrorCode::ValidationError, "hypothesis matrix is rank deficient");
}

LinearHypothesis covariate_hypothesis(int components, int covariates, const std::vector<int>& columns) {
  LinearHypothesis hyp{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(components * columns.size()),
                                             components * covariates),
                       Eigen::VectorXd::Zero(static_cast<Eigen::Index>(components * columns.size()))};
  int row = 0;
  for (int l : columns) {
    if (l < 0 || l >= covariates) throw Error(ErrorCode::ValidationError, "covariate column out of range");
    for (int k = 0; k < components; ++k) hyp.C(row++, vec_index(k, l, covariates)) = 1.0;
  }
  return hyp;
}

WaldWeights wald_weights(const LinearHypothesis& hyp, const CovarianceField& covariance,
                         const Eigen::MatrixXd& omega_z) {
  const int q = covariance.components;
  const auto r = omega_z.rows();
  hyp.validate(q, static_cast<int>(r));
  const Eigen::MatrixXd omega_inv = omega_z.ldlt().solve(Eigen::MatrixXd::Identity(r, r));
  WaldWeights out;
  out.inverse_middle.resize(static_cast<std::size_t>(covariance.points()));
  Eigen::MatrixXd kron(q * r, q * r);
  for (int j = 0; j < covariance.points(); ++j) {
    const Eigen::MatrixXd s = psd_clip(covariance.sigma_u_block(j, j));
    for (int k = 0; k < q; ++k)
      for (int kk = 0; kk < q; ++kk) kron.block(k * r, kk * r, r, r) = s(k, kk) * omega_inv;
    bool ridged = false;
    try {
      out.inverse_middle[static_cast<std::size_t>(j)] =
          ridge_inverse(hyp.C * kron * hyp.C.transpose(), ErrorCode::SingularMiddleMatrix, &ridged);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularMiddleMatrix) throw;
      throw Error(ErrorCode::SingularMiddleMatrix, "middle matrix vanishes at grid point " + std::to_string(j));
    }
    if (ridged) ++out.ridge_events;
  }
  return out;
}

double local_test(const Eigen::MatrixXd& b, const LinearHypothesis& hyp, const Eigen::MatrixXd& inverse_middle,
                  int subjects) {
  const Eigen::VectorXd d = hyp.C * vec_rows(b) - hyp.b0;
  return std::max(0.0, subjects * d.dot(inverse_middle * d));
}

std::vector<double> local_tests(const std::vector<Eigen::MatrixXd>& b, const LinearHypothesis& hyp,
                                const WaldWeights& weights, int subjects) {
  if (b.size() != weights.inverse_middle.size()) throw Error(ErrorCode::GridMismatch, "field and weights differ in size");
  std::vector<double> out(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) out[j] = local_test(b[j], hyp, weights.inverse_middle[j], subjects);
  return out;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "trapezoid inputs differ in length");
  double sum = 0.0;
  for (std::size_t j = 1; j < x.size(); ++j) sum += 0.5 * (x[j] - x[j - 1]) * (y[j] + y[j - 1]);
  return sum;
}

double global_test(const std::vector<double>& local_stats, const Grid& grid) {
  return trapezoid(grid.points(), local_stats);
}

namespace {

// Columns deleted by a "these covariates have zero coefficients" hypothesis,
// or empty when the hypothesis has another form.
std::vector<int> zero_columns(const LinearHypothesis& hyp, int q, int r) {
  if (hyp.b0.cwiseAbs().maxCoeff() != 0.0) return {};
  std::vector<int> hits(static_cast<std::size_t>(q * r), 0);
  for (Eigen::Index row = 0; row < hyp.C.rows(); ++row) {
    Eigen::Index at = -1;
    for (Eigen::Index c = 0; c < hyp.C.cols(); ++c) {
      if (hyp.C(row, c) == 0.0) continue;
      if (at >= 0) return {};
      at = c;
    }
    if (at < 0) return {};
    ++hits[static_cast<std::size_t>(at)];
  }
  std::vector<int> columns;
  for (int l = 0; l < r; ++l) {
    int count = 0;
    for (int k = 0; k < q; ++k) count += hits[static_cast<std::size_t>(vec_index(k, l, r))] > 0;
    if (count == q) columns.push_back(l);
    else if (count != 0) return {};
  }
  return columns;
}

CoefficientField fit_without_columns(const FunctionalResponse& data, const std::vector<int>& dropped, double h1,
                                     const EstimationOptions& options) {
  std::vector<int> kept;
  for (int l = 0; l < data.covariate_count(); ++l)
    if (std::find(dropped.begin(), dropped.end(), l) == dropped.end()) kept.push_back(l);
  const int q = data.components(), r = data.covariate_count();
  CoefficientField out{std::vector<double>(data.grid.points().begin(), data.grid.points().end()),
                       std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(data.points()), Eigen::MatrixXd::Zero(q, r)),
                       std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(data.points()), Eigen::MatrixXd::Zero(q, r)),
                       h1};
  if (kept.empty()) return out;
  const CoefficientField reduced = fit_coefficients(data.with_covariates(kept), h1, options);
  for (int j = 0; j < data.points(); ++j)
    for (std::size_t c = 0; c < kept.size(); ++c) {
      out.B[static_cast<std::size_t>(j)].col(kept[c]) = reduced.B[static_cast<std::size_t>(j)].col(static_cast<Eigen::Index>(c));
      out.Bdot[static_cast<std::size_t>(j)].col(kept[c]) =
          reduced.Bdot[static_cast<std::size_t>(j)].col(static_cast<Eigen::Index>(c));
    }
  return out;
}

}  // namespace

CoefficientField constrained_fit(const FunctionalResponse& data, const LinearHypothesis& hyp, double h1,
                                 const EstimationOptions& options) {
  data.validate();
  const int q = data.components(), r = data.covariate_count(), ng = data.points();
  hyp.validate(q, r);
  if (auto cols = zero_columns(hyp, q, r); !cols.empty()) return fit_without_columns(data, cols, h1, options);

  const int dim = q * r;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(hyp.C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd particular = svd.solve(hyp.b0);
  if ((hyp.C * particular - hyp.b0).norm() > 1e-9 * (1.0 + hyp.b0.norm())) {
    throw Error(ErrorCode::InfeasibleConstraint, "no coefficient matrix satisfies the hypothesis");
  }
  const int free = dim - hyp.rows();
  const Eigen::MatrixXd null_basis = svd.matrixV().rightCols(free);

  CoefficientField out{std::vector<double>(data.grid.points().begin(), data.grid.points().end()), {}, {}, h1};
  out.B.resize(static_cast<std::size_t>(ng));
  out.Bdot.resize(static_cast<std::size_t>(ng));

  const Eigen::VectorXd metric = options.weighted_metric ? data.metric : Eigen::VectorXd::Ones(q);
  const Eigen::MatrixXd gram = data.covariates.transpose() * data.covariates;
  // moments.row(j) = vec of W * sum_i v_ij z_i^T.
  Eigen::MatrixXd moments = Eigen::MatrixXd::Zero(ng, dim);
  for (int i = 0; i < data.subjects(); ++i) {
    const auto& v = data.values[static_cast<std::size_t>(i)];
    for (int k = 0; k < q; ++k)
      for (int l = 0; l < r; ++l) moments.col(vec_index(k, l, r)) += metric[k] * data.covariates(i, l) * v.col(k);
  }
  // Metric-weighted Gram W kron G in vec order.
  Eigen::MatrixXd wg = Eigen::MatrixXd::Zero(dim, dim);
  for (int k = 0; k < q; ++k) wg.block(k * r, k * r, r, r) = metric[k] * gram;

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(2 * dim, 2 * free);
  basis.topLeftCorner(dim, free) = null_basis;
  basis.bottomRightCorner(dim, free) = null_basis;
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(2 * dim);
  offset.head(dim) = particular;

  for (int s = 0; s < ng; ++s) {
    const double x = data.grid[s];
    Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * dim);
    for (int j = 0; j < ng; ++j) {
      const double kw = kernel_weight(data.grid[j] - x, h1, options.kernel);
      if (kw == 0.0) continue;
      const Eigen::Vector2d y = design_vector(data.grid[j], x, h1);
      a += kw * y * y.transpose();
      rhs.head(dim) += kw * y[0] * moments.row(j).transpose();
      rhs.tail(dim) += kw * y[1] * moments.row(j).transpose();
    }
    Eigen::VectorXd theta = offset;
    if (free > 0) {
      Eigen::MatrixXd normal(2 * dim, 2 * dim);
      for (int b = 0; b < 2; ++b)
        for (int bb = 0; bb < 2; ++bb) normal.block(b * dim, bb * dim, dim, dim) = a(b, bb) * wg;
      const Eigen::MatrixXd reduced = basis.transpose() * normal * basis;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(reduced);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 1e-12 * ldlt.vectorD().cwiseAbs().maxCoeff())) {
        throw Error(ErrorCode::SingularDesign, "constrained design singular at x=" + std::to_string(x));
      }
      theta += basis * ldlt.solve(basis.transpose() * (rhs - normal * offset));
    }
    Eigen::MatrixXd bx(q, r), bdot(q, r);
    for (int k = 0; k < q; ++k)
      for (int l = 0; l < r; ++l) {
        bx(k, l) = theta[vec_index(k, l, r)];
        bdot(k, l) = theta[dim + vec_index(k, l, r)];
      }
    out.B[static_cast<std::size_t>(s)] = bx;
    out.Bdot[static_cast<std::size_t>(s)] = bdot;
  }
  return out;
}

double exceedance_fraction(std::span<const double> stats, double observed) {
  if (stats.empty()) throw Error(ErrorCode::TooFewResamples, "no bootstrap statistics");
  std::size_t count = 0;
  for (double s : stats) count += s >= observed;
  return static_cast<double>(count) / static_cast<double>(stats.size());
}

namespace {

// Whether exp(Ivecs(v)) is a finite tensor passing the SPD check.
bool representable(const Eigen::VectorXd& v) {
  const SymMat3<double> a(Vector6<double>(v.head<6>()));
  // Eigenvalues are bounded by the Frobenius norm; a spread below 27 keeps
  // the exponentiated condition number well inside the SPD tolerance.
  if (a.norm() <= 13.0) return true;
  const auto eig = eigen_decompose(a);
  if (!(eig.values[0] <= exp_overflow_threshold<double>())) return false;
  return eig.values[2] - std::max(0.0, eig.values[0]) > std::log(kSpdTolerance) + 1.0;
}

// Block-diagonal Sigma_u (only the (x_j, x_j) blocks are filled) from the
// smoothed residuals of one bootstrap replicate.
Eigen::MatrixXd replicate_sigma_u(const std::vector<Eigen::MatrixXd>& values, const std::vector<Eigen::MatrixXd>& b,
                                  const Eigen::MatrixXd& covariates, const Eigen::MatrixXd& smoother, double divisor) {
  const auto ng = smoother.rows();
  const auto q = values.front().cols();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(ng * q, ng * q);
  Eigen::MatrixXd resid(ng, q);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Eigen::VectorXd z = covariates.row(static_cast<Eigen::Index>(i)).transpose();
    for (Eigen::Index j = 0; j < ng; ++j) resid.row(j) = values[i].row(j) - (b[static_cast<std::size_t>(j)] * z).transpose();
    const Eigen::MatrixXd u = smoother * resid;
    for (Eigen::Index j = 0; j < ng; ++j) sigma.block(j * q, j * q, q, q).noalias() += u.row(j).transpose() * u.row(j);
  }
  return sigma / divisor;
}

}  // namespace

TestReport wild_bootstrap(const FunctionalResponse& data, const ModelFit& fit, const LinearHypothesis& hyp,
                          const BootstrapOptions& options, const EstimationOptions& estimation) {
  if (options.G < 1) throw Error(ErrorCode::TooFewResamples, "bootstrap needs G >= 1");
  data.validate();
  const int n = data.subjects(), ng = data.points(), q = data.components();
  const bool tensors = options.tensor_response && q == 6;

  const WaldWeights weights = wald_weights(hyp, fit.covariance, fit.omega_z);
  TestReport report;
  report.x.assign(data.grid.points().begin(), data.grid.points().end());
  report.local_stats = local_tests(fit.field.B, hyp, weights, n);
  report.global_stat = global_test(report.local_stats, data.grid);
  report.G = options.G;
  report.seed = options.seed;
  report.ridge_events = weights.ridge_events;

  // Step (i): fit under H0 and split its residuals into smooth and rough parts.
  const double h1 = fit.field.bandwidth;
  const CoefficientField null_fit = constrained_fit(data, hyp, h1, estimation);
  const auto null_residuals = residual_matrix(data, null_fit);
  const DeviationField null_dev = smooth_deviations(null_residuals, data.grid, fit.deviations.bandwidth_h2,
                                                    estimation.kernel);
  const auto null_errors = error_residuals(null_residuals, null_dev);
  std::vector<Eigen::MatrixXd> null_mean(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    null_mean[ii] = data.values[ii] - null_residuals[ii];
  }
  const CoefficientEstimator estimator(data.grid, data.covariates, h1, data.grid.points(), estimation.kernel);
  const Eigen::MatrixXd smoother =
      options.restudentize ? smoother_matrix(data.grid, fit.deviations.bandwidth_h2, estimation.kernel).entries
                           : Eigen::MatrixXd();
  const double divisor = covariance_divisor(n, options.covariance);

  report.bootstrap_global.assign(static_cast<std::size_t>(options.G), 0.0);
  report.bootstrap_max.assign(static_cast<std::size_t>(options.G), 0.0);
  std::vector<int> redraws(static_cast<std::size_t>(options.G), 0);
  const long max_failures = 10L * options.G;

  parallel_for(options.G, options.threads, [&](int g) {
    std::vector<Eigen::MatrixXd> values(static_cast<std::size_t>(n));
    std::vector<Eigen::MatrixXd> b;
    for (std::uint64_t attempt = 0;; ++attempt) {
      NormalStream rng(options.seed, {static_cast<std::uint64_t>(g), attempt});
      bool ok = true;
      for (int i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const double tau = rng();
        values[ii] = null_mean[ii] + tau * null_dev.u_hat[ii];
        for (int j = 0; j < ng; ++j) values[ii].row(j) += rng() * null_errors[ii].row(j);
      }
      if (tensors) {
        for (int i = 0; i < n && ok; ++i)
          for (int j = 0; j < ng && ok; ++j) ok = representable(values[static_cast<std::size_t>(i)].row(j).transpose());
      }
      if (ok) break;
      if (++redraws[static_cast<std::size_t>(g)] > max_failures) {
        throw Error(ErrorCode::BootstrapFailure, "too many unrepresentable bootstrap draws");
      }
    }
    estimator.fit_values(values, b);
    std::vector<double> stats;
    if (options.restudentize) {
      CovarianceField cov;
      cov.components = q;
      cov.sigma_u = replicate_sigma_u(values, b, data.covariates, smoother, divisor);
      stats = local_tests(b, hyp, wald_weights(hyp, cov, fit.omega_z), n);
    } else {
      stats = local_tests(b, hyp, weights, n);
    }
    report.bootstrap_global[static_cast<std::size_t>(g)] = global_test(stats, data.grid);
    report.bootstrap_max[static_cast<std::size_t>(g)] = *std::max_element(stats.begin(), stats.end());
  });

  long total = 0;
  for (int c : redraws) total += c;
  if (total > max_failures) throw Error(ErrorCode::BootstrapFailure, "too many unrepresentable bootstrap draws");
  report.redraws = static_cast<int>(total);

  report.global_p = exceedance_fraction(report.bootstrap_global, report.global_stat);
  report.local_p_corrected.resize(static_cast<std::size_t>(ng));
  for (int j = 0; j < ng; ++j) {
    report.local_p_corrected[static_cast<std::size_t>(j)] =
        exceedance_fraction(report.bootstrap_max, report.local_stats[static_cast<std::size_t>(j)]);
  }
  return report;
}

std::vector<Eigen::MatrixXd> resample_path(const CoefficientEstimator& estimator,
                                           const std::vector<Eigen::MatrixXd>& residuals,
                                           std::span<const double> tau) {
  if (tau.size() != residuals.size()) throw Error(ErrorCode::ShapeMismatch, "one multiplier per subject required");
  std::vector<Eigen::MatrixXd> scaled(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) scaled[i] = tau[i] * residuals[i];
  std::vector<Eigen::MatrixXd> path;
  estimator.fit_values(scaled, path);
  const double root_n = std::sqrt(static_cast<double>(residuals.size()));
  for (auto& p : path) p *= root_n;
  return path;
}

std::vector<std::vector<Eigen::MatrixXd>> resample_XB(const CoefficientEstimator& estimator,
                                                      const std::vector<Eigen::MatrixXd>& residuals, int G,
                                                      std::uint64_t seed, int threads) {
  if (G < 1) throw Error(ErrorCode::TooFewResamples, "resampling needs G >= 1");
  std::vector<std::vector<Eigen::MatrixXd>> paths(static_cast<std::size_t>(G));
  parallel_for(G, threads, [&](int g) {
    NormalStream rng(seed, {static_cast<std::uint64_t>(g)});
    std::vector<double> tau(residuals.size());
    for (auto& t : tau) t = rng();
    paths[static_cast<std::size_t>(g)] = resample_path(estimator, residuals, tau);
  });
  return paths;
}

double upper_percentile(std::vector<double> values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::ValidationError, "alpha must lie in (0, 1)");
  const auto G = static_cast<double>(values.size());
  if (values.empty() || G < std::ceil(1.0 / alpha - 1e-9)) {
    throw Error(ErrorCode::TooFewResamples, "need at least ceil(1/alpha) resamples");
  }
  std::sort(values.begin(), values.end());
  const auto index = static_cast<std::size_t>(std::max(1.0, std::ceil((1.0 - alpha) * G - 1e-9)));
  return values[std::min(index, values.size()) - 1];
}

CoefficientBand coefficient_band(const std::vector<std::vector<Eigen::MatrixXd>>& paths,
                                 const CoefficientField& field, int k, int l, double alpha, int subjects) {
  std::vector<double> sups(paths.size(), 0.0);
  for (std::size_t g = 0; g < paths.size(); ++g) {
    if (paths[g].size() != field.B.size()) throw Error(ErrorCode::GridMismatch, "paths and field differ in size");
    for (const auto& p : paths[g]) sups[g] = std::max(sups[g], std::abs(p(k, l)));
  }
  CoefficientBand band;
  band.k = k;
  band.l = l;
  band.x = field.x;
  band.critical = upper_percentile(std::move(sups), alpha);
  band.estimate = field.coefficient(k, l);
  const double half = band.critical / std::sqrt(static_cast<double>(subjects));
  band.lower = band.estimate.array() - half;
  band.upper = band.estimate.array() + half;
  return band;
}

double spd_band_critical(const std::vector<std::vector<Eigen::MatrixXd>>& paths, const Eigen::VectorXd& z,
                         double alpha, int subjects) {
  std::vector<double> sups(paths.size(), 0.0);
  const double root_n = std::sqrt(static_cast<double>(subjects));
  for (std::size_t g = 0; g < paths.size(); ++g)
    for (const auto& p : paths[g]) {
      const Eigen::VectorXd v = p * z;
      sups[g] = std::max(sups[g], ivecs(Vector6<double>(v.head<6>())).norm() / root_n);
    }
  return upper_percentile(std::move(sups), alpha);
}

double band_bandwidth(const Grid& grid, double h1, double shrink, KernelType kernel) {
  double h = std::max(h1 * shrink, 1.5 * grid.max_spacing());
  while (!bandwidth_feasible(grid, h, kernel) && h < grid.length()) h *= 1.05;
  return h;
}

}  // namespace vcdf
