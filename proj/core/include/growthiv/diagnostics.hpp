#pragma once

#include "growthiv/estimators.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace growthiv {

struct TestResult {
  double stat = 0.0;
  int df = 0;
  std::optional<double> p;        // absent when the test is undefined (df = 0)
  bool generalized_inverse = false;
};

// Per-specification weak-instrument, identification and endogeneity statistics.
struct DiagnosticsReport {
  std::optional<TestResult> hansen_j;              // absent when exactly identified
  TestResult underid;                              // robust rank LM
  double kp_wald_f = 0.0;                          // robust rank Wald / m
  std::vector<std::pair<std::string, double>> ap_partial_f;
  std::optional<TestResult> hausman;

  double ap_f(const std::string& endog_name) const;
};

enum class Weighting { cluster, homoskedastic };

// First-stage regression of the endogenous regressors on the excluded
// instruments after partialling out X_exog. Shared by the rank Wald and LM
// statistics so both test the same coefficient matrix.
struct ReducedForm {
  Matrix x_tilde;                 // M_{X_exog} X_endog, columns scaled to unit RMS
  Matrix z_tilde;                 // M_{X_exog} Z_excl, columns scaled to unit RMS
  Matrix zz;                      // z_tilde' z_tilde
  Matrix pi;                      // m x k1
  Matrix resid;                   // x_tilde - z_tilde pi
  std::vector<int> cluster;
  int n_clusters = 0;
  int k_exog = 0;

  Eigen::Index n() const { return x_tilde.rows(); }
  int k() const { return static_cast<int>(x_tilde.cols()); }
  int m() const { return static_cast<int>(z_tilde.cols()); }
};

// Builds the reduced form after pruning redundant instruments. Throws
// ValidationError when m < k1.
ReducedForm reduced_form(const DesignMatrices& d);

// Kleibergen-Paap rank statistic for H0: rank(pi) = k1 - 1.
// `lm` selects the LM form (covariance under the rank-reduced null).
double kp_rank_statistic(const ReducedForm& rf, Weighting w, bool lm);

// Robust Kleibergen-Paap Wald F (rank Wald / m); the "CD" statistic.
double kp_wald_f(const ReducedForm& rf, Weighting w = Weighting::cluster);
double kp_wald_f(const DesignMatrices& d, Weighting w = Weighting::cluster);

// Under-identification test, df = m - k1 + 1. With cluster weighting this is
// the Kleibergen-Paap rank LM; homoskedastic weighting falls back to the
// Anderson canonical-correlation LM, n times the smallest squared canonical
// correlation between X_endog and Z_excl.
TestResult underid_test(const ReducedForm& rf, Weighting w = Weighting::cluster);
TestResult underid_test(const DesignMatrices& d, Weighting w = Weighting::cluster);

// Angrist-Pischke partial F for endogenous regressor j.
double ap_partial_f(const DesignMatrices& d, int j);

// Cluster-robust Hansen J over-identification statistic evaluated at the
// fit's residuals. df = m - k1; exactly identified models give stat 0,
// df 0 and no p-value.
TestResult hansen_j(const FitResult& fit, const DesignMatrices& d);

// Hausman contrast of the endogenous coefficients. The middle matrix
// V_iv - V_ols is pseudo-inverted on its positive eigenvalues; the
// generalized_inverse flag reports a non-positive-definite difference.
TestResult hausman(const FitResult& ols, const FitResult& iv);

// All statistics for one IV/LIML fit; `ols` may be omitted to skip Hausman.
DiagnosticsReport diagnose(const DesignMatrices& d, const FitResult& iv, const FitResult* ols);

}  // namespace growthiv
