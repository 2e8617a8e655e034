#pragma once

// Small synthetic datasets shared by the unit and acceptance tests.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "vcdf/dataset.hpp"
#include "vcdf/spd.hpp"

namespace fixture {

/// Covariates (1, uniform, uniform) for n subjects, r columns.
inline Eigen::MatrixXd covariates(int n, int r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd z(n, r);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = 1.0;
    for (int l = 1; l < r; ++l) z(i, l) = u(rng);
  }
  return z;
}

/// Noiseless responses v_i(x_j) = B(x_j) z_i with q components.
inline vcdf::FunctionalResponse noiseless(const vcdf::Grid& grid, const Eigen::MatrixXd& z, int q,
                                          const std::function<Eigen::MatrixXd(double)>& B) {
  vcdf::FunctionalResponse d;
  d.grid = grid;
  d.covariates = z;
  d.metric = q == 6 ? Eigen::VectorXd(vcdf::frobenius_weights<double>()) : Eigen::VectorXd::Ones(q);
  for (int i = 0; i < z.rows(); ++i) {
    Eigen::MatrixXd v(grid.size(), q);
    for (int j = 0; j < grid.size(); ++j) v.row(j) = (B(grid[j]) * z.row(i).transpose()).transpose();
    d.values.push_back(v);
  }
  return d;
}

/// Random q x r matrix with entries in [-1, 1].
inline Eigen::MatrixXd random_matrix(int q, int r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(q, r);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < r; ++b) m(a, b) = u(rng);
  return m;
}

/// Responses with i.i.d. Gaussian noise of standard deviation `sd` added.
inline vcdf::FunctionalResponse noisy(vcdf::FunctionalResponse d, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, sd);
  for (auto& v : d.values)
    for (Eigen::Index a = 0; a < v.size(); ++a) v.data()[a] += nd(rng);
  return d;
}

/// Irregular strictly increasing grid on [0, length].
inline vcdf::Grid jittered_grid(int count, double length, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  std::vector<double> x(static_cast<std::size_t>(count));
  const double step = length / (count - 1);
  for (int j = 0; j < count; ++j) x[static_cast<std::size_t>(j)] = j * step + (j == 0 || j == count - 1 ? 0.0 : u(rng) * step);
  return vcdf::Grid(x, length);
}

/// n x n_G matrices of q-vectors with i.i.d. standard normal entries.
inline std::vector<Eigen::MatrixXd> gaussian_curves(int n, int ng, int q, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<Eigen::MatrixXd> out;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd m(ng, q);
    for (Eigen::Index a = 0; a < m.size(); ++a) m.data()[a] = nd(rng);
    out.push_back(m);
  }
  return out;
}

}  // namespace fixture
