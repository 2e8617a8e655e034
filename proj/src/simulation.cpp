#include "vcdf/simulation.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/students_t.hpp>

#include "vcdf/inference.hpp"
#include "vcdf/random.hpp"
#include "vcdf/spd.hpp"

namespace vcdf {

namespace {

constexpr std::uint64_t kCovariateStream = 0xC0;
constexpr std::uint64_t kNoiseStream = 0x40;
constexpr std::uint64_t kLibraryStream = 0x41;
constexpr std::uint64_t kBootstrapStream = 0xB0;
constexpr std::uint64_t kResampleStream = 0xB1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix3<double> rotation(double s) {
  const double a = 0.6 * std::sin(std::numbers::pi * s);
  const double b = 0.3 * std::cos(std::numbers::pi * s);
  Matrix3<double> rz, ry;
  rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  ry << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
  return rz * ry;
}

Vector6<double> rotated(const Matrix3<double>& r, const Matrix3<double>& m) {
  return vecs(SymMat3<double>::from_matrix(r * m * r.transpose()));
}

// Built-in coefficient family at arc-length fraction s, before c is applied.
Eigen::MatrixXd builtin_coefficients(double s, double age_effect) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const Matrix3<double> r = rotation(s);
  Eigen::MatrixXd b(6, 3);

  const Vector3<double> lambda(1.5e-3 * (1.0 + 0.15 * std::sin(two_pi * s)),
                               0.5e-3 * (1.0 + 0.10 * std::cos(two_pi * s)),
                               0.4e-3 * (1.0 + 0.10 * std::sin(std::numbers::pi * s)));
  b.col(0) = rotated(r, lambda.array().log().matrix().asDiagonal());

  const Vector3<double> group(0.02 * std::sin(two_pi * s), -0.015, 0.01 * std::cos(two_pi * s));
  b.col(1) = rotated(r, group.asDiagonal());

  // Age shrinks the minor eigenvalues and turns the principal direction.
  const double w = 1.0 + 0.3 * std::sin(two_pi * s);
  const double turn = 0.5 * std::cos(std::numbers::pi * s);
  Matrix3<double> age;
  age << 0.2 * w, turn, 0, turn, -w, 0, 0, 0, -w;
  b.col(2) = rotated(r, age_effect * age);
  return b;
}

// Square root factor of the squared-exponential covariance on the grid.
Eigen::MatrixXd gp_factor(const Grid& grid, double sd, double length) {
  const int ng = grid.size();
  Eigen::MatrixXd k(ng, ng);
  for (int a = 0; a < ng; ++a)
    for (int b = 0; b < ng; ++b) {
      const double d = (grid[a] - grid[b]) / length;
      k(a, b) = sd * sd * std::exp(-0.5 * d * d);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

int tested_column(const SimulationScenario& scn) { return scn.source ? scn.source->tested_column : 2; }

double choose_h1(const FunctionalResponse& resp, const ModelOptions& options) {
  if (options.h1) return *options.h1;
  auto candidates = options.h1_candidates.empty() ? default_bandwidth_candidates(resp.grid) : options.h1_candidates;
  return select_h1(resp, std::move(candidates), options.estimation).selected;
}

Eigen::VectorXd row_z(const Eigen::MatrixXd& z, int i) { return z.row(i).transpose(); }

}  // namespace

Grid SimulationScenario::grid() const {
  if (source) return source->grid;
  return Grid::uniform(points, length);
}

void SimulationScenario::validate() const {
  if (source) {
    if (source->B.empty() || source->u.empty() || source->eps.empty()) {
      throw Error(ErrorCode::ConfigError, "fitted source is incomplete");
    }
    if (static_cast<int>(source->B.size()) != source->grid.size()) {
      throw Error(ErrorCode::ConfigError, "fitted source coefficients do not match its grid");
    }
    if (source->tested_column < 0 || source->tested_column >= source->covariates.cols()) {
      throw Error(ErrorCode::ConfigError, "tested column out of range");
    }
    return;
  }
  if (subjects < 4) throw Error(ErrorCode::ConfigError, "scenario needs at least 4 subjects");
  if (points < 3) throw Error(ErrorCode::ConfigError, "scenario needs at least 3 grid points");
  if (!(length > 0.0)) throw Error(ErrorCode::ConfigError, "tract length must be positive");
  if (!(deviation_scale >= 0.0) || !(error_scale >= 0.0) || !(deviation_length > 0.0)) {
    throw Error(ErrorCode::ConfigError, "noise scales must be nonnegative and the length scale positive");
  }
  if (!(group_probability > 0.0 && group_probability < 1.0)) {
    throw Error(ErrorCode::ConfigError, "group probability must lie in (0, 1)");
  }
}

SimulationScenario paper_scale_scenario() {
  SimulationScenario scn;
  scn.subjects = 96;
  scn.points = 112;
  return scn;
}

SimulationScenario scenario_from_fit(const TractDataset& data, const ModelFit& fit, int tested, std::uint64_t seed) {
  SimulationScenario scn;
  scn.subjects = data.subjects();
  scn.points = data.points();
  scn.length = data.grid().length();
  scn.seed = seed;
  scn.source = FittedSource{data.grid(), fit.field.B, fit.deviations.u_hat, fit.errors, data.covariates(), tested};
  scn.validate();
  return scn;
}

std::vector<std::string> scenario_covariate_names() { return {"intercept", "group", "age"}; }

Eigen::MatrixXd scenario_covariates(const SimulationScenario& scn) {
  scn.validate();
  if (scn.source) {
    Eigen::MatrixXd z(scn.subjects, scn.source->covariates.cols());
    for (int i = 0; i < scn.subjects; ++i) z.row(i) = scn.source->covariates.row(i % scn.source->covariates.rows());
    return z;
  }
  const int n = scn.subjects;
  Eigen::MatrixXd z(n, 3);
  for (std::uint64_t attempt = 0;; ++attempt) {
    NormalStream rng(scn.seed, {kCovariateStream, attempt});
    int ones = 0;
    for (int i = 0; i < n; ++i) {
      z(i, 0) = 1.0;
      z(i, 1) = rng.uniform() < scn.group_probability ? 1.0 : 0.0;
      z(i, 2) = rng();
      ones += z(i, 1) > 0.0;
    }
    if (ones >= 2 && ones <= n - 2) break;
  }
  const double mean = z.col(2).mean();
  z.col(2).array() -= mean;
  const double sd = std::sqrt(z.col(2).squaredNorm() / (n - 1));
  if (sd > 0.0) z.col(2) /= sd;
  return z;
}

std::vector<Eigen::MatrixXd> true_coefficients(const SimulationScenario& scn) {
  scn.validate();
  const Grid grid = scn.grid();
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(grid.size()));
  const int tested = tested_column(scn);
  for (int j = 0; j < grid.size(); ++j) {
    auto& b = out[static_cast<std::size_t>(j)];
    b = scn.source ? scn.source->B[static_cast<std::size_t>(j)]
                   : builtin_coefficients(grid[j] / grid.length(), scn.age_effect);
    b.col(tested) *= scn.c;
  }
  return out;
}

namespace {

// Deviation and error curves per subject, fixed for the scenario seed.
void scenario_library(const SimulationScenario& scn, const Grid& grid, std::vector<Eigen::MatrixXd>& u,
                      std::vector<Eigen::MatrixXd>& eps) {
  if (scn.source) {
    u = scn.source->u;
    eps = scn.source->eps;
    return;
  }
  const int n = scn.subjects, ng = grid.size();
  const Eigen::MatrixXd factor = gp_factor(grid, scn.deviation_scale, scn.deviation_length * grid.length());
  NormalStream rng(scn.seed, {kLibraryStream});
  u.assign(static_cast<std::size_t>(n), Eigen::MatrixXd(ng, 6));
  eps.assign(static_cast<std::size_t>(n), Eigen::MatrixXd(ng, 6));
  Eigen::VectorXd draws(ng);
  for (int i = 0; i < n; ++i) {
    auto& ui = u[static_cast<std::size_t>(i)];
    auto& ei = eps[static_cast<std::size_t>(i)];
    for (int e = 0; e < 6; ++e) {
      for (int j = 0; j < ng; ++j) draws[j] = rng();
      ui.col(e) = factor * draws;
    }
    for (int j = 0; j < ng; ++j)
      for (int e = 0; e < 6; ++e) ei(j, e) = scn.error_scale * rng();
  }
}

}  // namespace

TractDataset generate_dataset(const SimulationScenario& scn, std::uint64_t replicate) {
  const Grid grid = scn.grid();
  const Eigen::MatrixXd z = scenario_covariates(scn);
  const auto b = true_coefficients(scn);
  const int n = scn.subjects, ng = grid.size();
  std::vector<Eigen::MatrixXd> u, eps;
  scenario_library(scn, grid, u, eps);

  NormalStream rng(scn.seed, {kNoiseStream, replicate});
  std::vector<std::vector<TractDataset::Tensor>> tensors(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& ui = u[static_cast<std::size_t>(i) % u.size()];
    const auto& ei = eps[static_cast<std::size_t>(i) % eps.size()];
    const double tau = rng();
    auto& row = tensors[static_cast<std::size_t>(i)];
    row.reserve(static_cast<std::size_t>(ng));
    const Eigen::VectorXd zi = row_z(z, i);
    for (int j = 0; j < ng; ++j) {
      const double tau_j = rng();
      const Vector6<double> v =
          b[static_cast<std::size_t>(j)] * zi + tau * ui.row(j).transpose() + tau_j * ei.row(j).transpose();
      row.push_back(matrix_exp(ivecs(v)));
    }
  }
  std::vector<std::string> names = scenario_covariate_names();
  if (scn.source) {
    names.clear();
    for (Eigen::Index l = 0; l < z.cols(); ++l) names.push_back("z" + std::to_string(l));
  }
  return TractDataset(grid, std::move(tensors), z, names);
}

Eigen::VectorXd mab(const std::vector<Eigen::MatrixXd>& estimates, const Eigen::MatrixXd& truth) {
  if (estimates.empty()) throw Error(ErrorCode::ShapeMismatch, "MAB needs at least one replicate");
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(truth.rows(), truth.cols());
  for (const auto& e : estimates) {
    if (e.rows() != truth.rows() || e.cols() != truth.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "estimate shape differs from truth");
    }
    mean += e;
  }
  mean /= static_cast<double>(estimates.size());
  return (mean - truth).cwiseAbs().colwise().mean().transpose();
}

std::string pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::Tensor: return "tensor";
    case Pipeline::FA: return "fa";
    case Pipeline::MD: return "md";
    case Pipeline::FAandMD: return "fa_md";
  }
  return "unknown";
}

FunctionalResponse pipeline_response(const TractDataset& data, Pipeline p) {
  switch (p) {
    case Pipeline::Tensor: return data.log_response();
    case Pipeline::FA: return scalar_response(data, ScalarQuantity::FA);
    case Pipeline::MD: return scalar_response(data, ScalarQuantity::MD);
    case Pipeline::FAandMD: return scalar_response(data, ScalarQuantity::FAandMD);
  }
  throw Error(ErrorCode::ConfigError, "unknown pipeline");
}

double PowerResult::rate(Pipeline p, double c, double alpha) const {
  for (const auto& cell : cells)
    if (cell.pipeline == p && cell.c == c && cell.alpha == alpha) return cell.rate;
  return std::nan("");
}

PowerResult run_power_study(const SimulationScenario& scn, const std::vector<double>& c_values,
                            const std::vector<double>& alphas, const StudyOptions& options,
                            const std::vector<Pipeline>& pipelines) {
  const auto t0 = Clock::now();
  scn.validate();
  const int reps = options.replicates;
  const auto np = pipelines.size();
  PowerResult res;
  res.pipelines = pipelines;
  res.c_values = c_values;
  res.p_values.assign(c_values.size(),
                      std::vector<std::vector<double>>(np, std::vector<double>(static_cast<std::size_t>(reps), std::nan(""))));
  ModelOptions model = options.model;
  model.estimate_error_covariance = false;
  const int tested = tested_column(scn);

  for (std::size_t ci = 0; ci < c_values.size(); ++ci) {
    SimulationScenario s = scn;
    s.c = c_values[ci];
    auto& cell_p = res.p_values[ci];
    parallel_for(reps, options.threads, [&](int rep) {
      const TractDataset data = generate_dataset(s, static_cast<std::uint64_t>(rep));
      for (std::size_t pi = 0; pi < np; ++pi) {
        try {
          const FunctionalResponse resp = pipeline_response(data, pipelines[pi]);
          const ModelFit fit = fit_model(resp, model);
          const auto hyp = covariate_hypothesis(resp.components(), resp.covariate_count(), {tested});
          BootstrapOptions boot;
          boot.G = options.G;
          boot.seed = stream_seed(s.seed, {kBootstrapStream, static_cast<std::uint64_t>(rep), pi});
          boot.threads = 1;
          boot.tensor_response = pipelines[pi] == Pipeline::Tensor;
          boot.restudentize = options.restudentize;
          boot.covariance = model.covariance;
          cell_p[pi][static_cast<std::size_t>(rep)] = wild_bootstrap(resp, fit, hyp, boot, model.estimation).global_p;
        } catch (const Error&) {
          // Counted as a failed replicate below.
        }
      }
    });
    for (std::size_t pi = 0; pi < np; ++pi)
      for (double alpha : alphas) {
        PowerCell cell{pipelines[pi], c_values[ci], alpha, 0.0, 0, 0};
        int rejected = 0;
        for (double p : cell_p[pi]) {
          if (std::isnan(p)) {
            ++cell.failures;
            continue;
          }
          ++cell.replicates;
          rejected += p <= alpha;
        }
        cell.rate = cell.replicates > 0 ? static_cast<double>(rejected) / cell.replicates : std::nan("");
        res.cells.push_back(cell);
      }
  }
  res.seconds = seconds_since(t0);
  return res;
}

BiasResult run_bias_study(const SimulationScenario& scn, const StudyOptions& options) {
  const auto t0 = Clock::now();
  scn.validate();
  const int reps = options.replicates;
  const Grid grid = scn.grid();
  const Eigen::MatrixXd z = scenario_covariates(scn);
  const auto truth_b = true_coefficients(scn);
  const int n = scn.subjects, ng = grid.size();

  Eigen::MatrixXd fa_truth(n, ng), md_truth(n, ng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < ng; ++j) {
      const auto sd = scalar_diffusion(matrix_exp(ivecs(Vector6<double>(truth_b[static_cast<std::size_t>(j)] * row_z(z, i)))));
      fa_truth(i, j) = sd.fa;
      md_truth(i, j) = sd.md;
    }

  std::vector<Eigen::MatrixXd> fa_a(static_cast<std::size_t>(reps)), fa_b(fa_a), md_a(fa_a), md_b(fa_a);
  parallel_for(reps, options.threads, [&](int rep) {
    const auto s = static_cast<std::size_t>(rep);
    const TractDataset data = generate_dataset(scn, static_cast<std::uint64_t>(rep));
    const auto& logs = data.log_response();
    const CoefficientField tensor_fit = fit_coefficients(logs, choose_h1(logs, options.model), options.model.estimation);
    const auto fa_resp = scalar_response(data, ScalarQuantity::FA);
    const auto md_resp = scalar_response(data, ScalarQuantity::MD);
    const CoefficientField fa_fit = fit_coefficients(fa_resp, choose_h1(fa_resp, options.model), options.model.estimation);
    const CoefficientField md_fit = fit_coefficients(md_resp, choose_h1(md_resp, options.model), options.model.estimation);
    fa_a[s].resize(n, ng);
    md_a[s].resize(n, ng);
    fa_b[s].resize(n, ng);
    md_b[s].resize(n, ng);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd zi = row_z(z, i);
      for (int j = 0; j < ng; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const auto sd = scalar_diffusion(matrix_exp(ivecs(Vector6<double>(tensor_fit.B[jj] * zi))));
        fa_a[s](i, j) = sd.fa;
        md_a[s](i, j) = sd.md;
        fa_b[s](i, j) = fa_fit.B[jj].row(0).dot(zi);
        md_b[s](i, j) = md_fit.B[jj].row(0).dot(zi);
      }
    }
  });

  BiasResult res;
  res.x.assign(grid.points().begin(), grid.points().end());
  res.fa_tensor = mab(fa_a, fa_truth);
  res.fa_scalar = mab(fa_b, fa_truth);
  res.md_tensor = mab(md_a, md_truth);
  res.md_scalar = mab(md_b, md_truth);
  res.replicates = reps;
  res.seconds = seconds_since(t0);
  return res;
}

CoverageResult run_coverage_study(const SimulationScenario& scn, const std::vector<double>& alphas,
                                  const StudyOptions& options, double band_shrink,
                                  std::vector<Eigen::VectorXd> z_vectors) {
  const auto t0 = Clock::now();
  scn.validate();
  const Grid grid = scn.grid();
  const auto truth = true_coefficients(scn);
  const int q = 6;
  const int r = static_cast<int>(truth.front().cols());
  if (z_vectors.empty()) {
    Eigen::VectorXd group1 = Eigen::VectorXd::Zero(r), group0 = Eigen::VectorXd::Zero(r);
    group1[0] = group0[0] = 1.0;
    if (r > 1) group1[1] = 1.0;
    z_vectors = {group1, group0};
  }
  const int reps = options.replicates;
  const int targets = q * r + static_cast<int>(z_vectors.size());
  // covered[rep][alpha][target]: 1 covered, 0 missed, -1 failed replicate.
  std::vector<std::vector<std::vector<int>>> covered(
      static_cast<std::size_t>(reps),
      std::vector<std::vector<int>>(alphas.size(), std::vector<int>(static_cast<std::size_t>(targets), -1)));

  parallel_for(reps, options.threads, [&](int rep) {
    try {
      const TractDataset data = generate_dataset(scn, static_cast<std::uint64_t>(rep));
      const auto& logs = data.log_response();
      const int n = logs.subjects();
      const double h1 = choose_h1(logs, options.model);
      const auto residuals = residual_matrix(logs, fit_coefficients(logs, h1, options.model.estimation));
      const double hb = band_bandwidth(grid, h1, band_shrink, options.model.estimation.kernel);
      const CoefficientEstimator estimator(grid, logs.covariates, hb, grid.points(), options.model.estimation.kernel);
      const CoefficientField band_fit = estimator.fit(logs.values);
      const auto paths = resample_XB(estimator, residuals, options.G,
                                     stream_seed(scn.seed, {kResampleStream, static_cast<std::uint64_t>(rep)}), 1);
      const double root_n = std::sqrt(static_cast<double>(n));
      for (std::size_t a = 0; a < alphas.size(); ++a) {
        auto& out = covered[static_cast<std::size_t>(rep)][a];
        for (int k = 0; k < q; ++k)
          for (int l = 0; l < r; ++l) {
            const auto band = coefficient_band(paths, band_fit, k, l, alphas[a], n);
            double worst = 0.0;
            for (int j = 0; j < grid.size(); ++j)
              worst = std::max(worst, std::abs(band.estimate[j] - truth[static_cast<std::size_t>(j)](k, l)));
            out[static_cast<std::size_t>(k * r + l)] = worst <= band.critical / root_n;
          }
        for (std::size_t m = 0; m < z_vectors.size(); ++m) {
          const double crit = spd_band_critical(paths, z_vectors[m], alphas[a], n);
          double worst = 0.0;
          for (int j = 0; j < grid.size(); ++j) {
            const auto jj = static_cast<std::size_t>(j);
            const Eigen::VectorXd diff = (band_fit.B[jj] - truth[jj]) * z_vectors[m];
            worst = std::max(worst, ivecs(Vector6<double>(diff)).norm());
          }
          out[static_cast<std::size_t>(q * r) + m] = worst <= crit;
        }
      }
    } catch (const Error&) {
      // Left at -1 and counted as a failure.
    }
  });

  CoverageResult res;
  res.z_vectors = z_vectors;
  for (const auto& rep : covered) res.failures += rep.front().front() < 0;
  for (std::size_t a = 0; a < alphas.size(); ++a)
    for (int t = 0; t < targets; ++t) {
      CoverageCell cell;
      cell.alpha = alphas[a];
      if (t < q * r) {
        cell.k = t / r;
        cell.l = t % r;
        cell.target = "beta_" + std::to_string(cell.k) + "_" + std::to_string(cell.l);
      } else {
        cell.target = "spd_" + std::to_string(t - q * r);
      }
      int hits = 0;
      for (const auto& rep : covered) {
        const int v = rep[a][static_cast<std::size_t>(t)];
        if (v < 0) continue;
        ++cell.replicates;
        hits += v;
      }
      cell.coverage = cell.replicates > 0 ? static_cast<double>(hits) / cell.replicates : std::nan("");
      res.cells.push_back(cell);
    }
  res.seconds = seconds_since(t0);
  return res;
}

MissingCovariateResult run_missing_covariate_study(const SimulationScenario& scn, const StudyOptions& options) {
  const auto t0 = Clock::now();
  scn.validate();
  const Grid grid = scn.grid();
  const auto truth = true_coefficients(scn);
  const int reps = options.replicates, ng = grid.size();
  const int tested = tested_column(scn);
  std::vector<Eigen::VectorXd> full(static_cast<std::size_t>(reps)), reduced(full);

  parallel_for(reps, options.threads, [&](int rep) {
    const TractDataset data = generate_dataset(scn, static_cast<std::uint64_t>(rep));
    const auto& logs = data.log_response();
    std::vector<int> kept;
    for (int l = 0; l < logs.covariate_count(); ++l)
      if (l != tested) kept.push_back(l);
    const auto small = logs.with_covariates(kept);
    const CoefficientField full_fit = fit_coefficients(logs, choose_h1(logs, options.model), options.model.estimation);
    const CoefficientField small_fit =
        fit_coefficients(small, choose_h1(small, options.model), options.model.estimation);
    auto& f = full[static_cast<std::size_t>(rep)];
    auto& s = reduced[static_cast<std::size_t>(rep)];
    f = Eigen::VectorXd::Zero(ng);
    s = Eigen::VectorXd::Zero(ng);
    for (int i = 0; i < logs.subjects(); ++i) {
      const Eigen::VectorXd zi = row_z(logs.covariates, i);
      const Eigen::VectorXd zs = row_z(small.covariates, i);
      for (int j = 0; j < ng; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const Eigen::VectorXd target = truth[jj] * zi;
        f[j] += ivecs(Vector6<double>(full_fit.B[jj] * zi - target)).norm();
        s[j] += ivecs(Vector6<double>(small_fit.B[jj] * zs - target)).norm();
      }
    }
    f /= logs.subjects();
    s /= logs.subjects();
  });

  MissingCovariateResult res;
  res.x.assign(grid.points().begin(), grid.points().end());
  res.full = Eigen::VectorXd::Zero(ng);
  res.reduced = Eigen::VectorXd::Zero(ng);
  Eigen::VectorXd diffs(reps);
  for (int rep = 0; rep < reps; ++rep) {
    res.full += full[static_cast<std::size_t>(rep)];
    res.reduced += reduced[static_cast<std::size_t>(rep)];
    diffs[rep] = (full[static_cast<std::size_t>(rep)] - reduced[static_cast<std::size_t>(rep)]).mean();
  }
  res.full /= reps;
  res.reduced /= reps;
  res.replicates = reps;
  res.mean_difference = diffs.mean();
  double half = 0.0;
  if (reps > 1) {
    const double sd = std::sqrt((diffs.array() - res.mean_difference).square().sum() / (reps - 1));
    const boost::math::students_t dist(reps - 1);
    half = boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(reps));
  }
  res.ci_low = res.mean_difference - half;
  res.ci_high = res.mean_difference + half;
  int smaller = 0;
  for (int j = 0; j < ng; ++j) smaller += res.full[j] < res.reduced[j];
  res.fraction_full_smaller = static_cast<double>(smaller) / ng;
  res.seconds = seconds_since(t0);
  return res;
}

}  // namespace vcdf
