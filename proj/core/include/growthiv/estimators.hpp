#pragma once

#include "growthiv/linalg.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace growthiv {

using linalg::Matrix;
using linalg::Vector;

// Regression inputs for one specification. Coefficients are always ordered
// as [endogenous..., exogenous...].
struct DesignMatrices {
  Vector y;
  Matrix x_endog;                 // n x k1
  Matrix x_exog;                  // n x k2, includes the intercept column
  Matrix z_excl;                  // n x m, excluded instruments
  std::vector<long long> cluster_ids;

  std::vector<std::string> endog_names;
  std::vector<std::string> exog_names;
  std::vector<std::string> instrument_names;

  Eigen::Index n() const { return y.size(); }
  int k_endog() const { return static_cast<int>(x_endog.cols()); }
  int k_exog() const { return static_cast<int>(x_exog.cols()); }
  int m() const { return static_cast<int>(z_excl.cols()); }

  // Throws ValidationError on shape mismatches, missing names, or
  // non-finite entries.
  void validate() const;
};

enum class Method { ols, iv_gmm, liml };

std::string_view to_string(Method m);

struct FitResult {
  Method method = Method::ols;
  std::vector<std::string> names;
  Vector coef;
  Matrix vcov;                    // empty when fewer than two clusters
  Vector residuals;
  int n = 0;
  int k_endog = 0;
  int k_exog = 0;
  int m = 0;                      // excluded instruments after pruning
  int n_clusters = 0;
  double kappa = 0.0;             // 0 for OLS, 1 for exactly identified IV
  std::vector<std::string> dropped_instruments;

  int index_of(std::string_view name) const;   // -1 if absent
  double coefficient(std::string_view name) const;
  double std_error(std::string_view name) const;
  bool has_vcov() const { return vcov.rows() == coef.size() && coef.size() > 0; }
};

// Drops excluded-instrument columns that are linearly dependent on X_exog or
// on earlier instruments (relative tolerance 1e-10). Dropped names are
// appended to `dropped` when non-null.
DesignMatrices prune_instruments(const DesignMatrices& d, std::vector<std::string>* dropped = nullptr);

FitResult fit_ols(const DesignMatrices& d);

// Exactly identified IV: (Z'X)^{-1} Z'y with Z = [X_exog, Z_excl].
FitResult fit_iv_gmm(const DesignMatrices& d);

// LIML as a k-class estimator; kappa is the smallest root of
// det(W'M_{X_exog}W - kappa W'M_Z W) = 0 with W = [y, X_endog].
FitResult fit_liml(const DesignMatrices& d);

// Cluster-robust sandwich covariance for a fit produced from `d`.
// Scores use the instrument-projected regressors for IV/LIML and the
// regressors themselves for OLS.
Matrix cluster_cov(const FitResult& fit, const DesignMatrices& d);

// Finite-sample factor G/(G-1) * (n-1)/(n-k).
double cluster_correction(Eigen::Index n, int k, int n_clusters);

// Maps arbitrary cluster keys to dense indices [0, G) in order of first
// appearance after sorting keys. Returns G.
int dense_clusters(const std::vector<long long>& ids, std::vector<int>& dense);

}  // namespace growthiv
