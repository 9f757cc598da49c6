#pragma once

#include "growthiv/estimators.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

using growthiv::DesignMatrices;
using growthiv::Matrix;
using growthiv::Vector;

class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double normal() { return norm_(eng_); }
  double uniform() { return unif_(eng_); }
  Matrix normal(Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal();
    return m;
  }
  std::mt19937_64& engine() { return eng_; }

private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> norm_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

inline std::vector<std::string> names(const std::string& stem, int k) {
  std::vector<std::string> out;
  for (int i = 0; i < k; ++i) out.push_back(stem + std::to_string(i + 1));
  return out;
}

// Shapes and names only; the caller fills the numbers. The first exogenous
// column is an intercept.
inline DesignMatrices shell(Eigen::Index n, int k1, int k2, int m, int cluster_size = 1) {
  DesignMatrices d;
  d.y = Vector::Zero(n);
  d.x_endog = Matrix::Zero(n, k1);
  d.x_exog = Matrix::Zero(n, k2);
  d.z_excl = Matrix::Zero(n, m);
  if (k2 > 0) d.x_exog.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) d.cluster_ids.push_back(i / cluster_size);
  d.endog_names = names("x", k1);
  d.exog_names = names("c", k2);
  if (k2 > 0) d.exog_names[0] = "intercept";
  d.instrument_names = names("z", m);
  return d;
}

struct IvDgp {
  int n = 500;
  int k1 = 1;
  int m = 3;
  double pi = 0.5;              // first-stage strength per instrument
  double endogeneity = 0.5;     // corr(u, v)
  double invalid = 0.0;         // direct effect of the first instrument on y
  int cluster_size = 1;
  bool heteroskedastic = false;
};

// Cross-sectional IV design: x_j = pi * (z_j + z_{j+1} + ...) + v_j,
// y = 1 + sum x + u + invalid * z_1.
inline DesignMatrices iv_design(const IvDgp& g, Rng& rng) {
  DesignMatrices d = shell(g.n, g.k1, 2, g.m, g.cluster_size);
  const double rho = g.endogeneity;
  for (Eigen::Index i = 0; i < g.n; ++i) {
    d.x_exog(i, 1) = rng.normal();
    for (int j = 0; j < g.m; ++j) d.z_excl(i, j) = rng.normal();
    const double u0 = rng.normal();
    const double scale = g.heteroskedastic ? 0.5 + std::abs(d.z_excl(i, 0)) : 1.0;
    const double u = u0 * scale;
    double y = 1.0 + 0.3 * d.x_exog(i, 1) + u + g.invalid * d.z_excl(i, 0);
    for (int j = 0; j < g.k1; ++j) {
      const double v = rho * u0 + std::sqrt(1.0 - rho * rho) * rng.normal();
      double x = 0.2 * d.x_exog(i, 1) + v;
      for (int l = j; l < g.m; ++l) x += g.pi * d.z_excl(i, l) * (l == j ? 1.0 : 0.5);
      d.x_endog(i, j) = x;
      y += x;
    }
    d.y(i) = y;
  }
  return d;
}

inline double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }
inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace fixtures
