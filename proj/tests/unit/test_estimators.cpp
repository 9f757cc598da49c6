#include "growthiv/error.hpp"
#include "growthiv/estimators.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <map>

using namespace growthiv;
using fixtures::max_abs_diff;

namespace {

Matrix regressors(const DesignMatrices& d) {
  Matrix x(d.n(), d.k_endog() + d.k_exog());
  x << d.x_endog, d.x_exog;
  return x;
}

Matrix instruments(const DesignMatrices& d) {
  Matrix z(d.n(), d.k_exog() + d.m());
  z << d.x_exog, d.z_excl;
  return z;
}

// n x n annihilator, built the slow way.
Matrix annihilator(const Matrix& a) {
  const Matrix p = a * (a.transpose() * a).inverse() * a.transpose();
  return Matrix::Identity(a.rows(), a.rows()) - p;
}

DesignMatrices random_ols(int n, std::uint64_t seed) {
  fixtures::Rng rng(seed);
  auto d = fixtures::shell(n, 1, 3, 0);
  d.x_endog = rng.normal(n, 1);
  d.x_exog.rightCols(2) = rng.normal(n, 2);
  d.y = rng.normal(n, 1).col(0) + 2.0 * d.x_endog.col(0);
  return d;
}

}  // namespace

TEST_CASE("ols recovers an exact linear relation") {
  fixtures::Rng rng(1);
  auto d = fixtures::shell(40, 2, 3, 0);
  d.x_endog = rng.normal(40, 2);
  d.x_exog.rightCols(2) = rng.normal(40, 2);
  Vector b(5);
  b << 1.5, -0.25, 3.0, 0.7, -2.0;
  d.y = regressors(d) * b;
  const auto fit = fit_ols(d);
  CHECK(fit.method == Method::ols);
  CHECK(max_abs_diff(fit.coef, b) < 1e-10);
  CHECK(fit.names == std::vector<std::string>{"x1", "x2", "intercept", "c2", "c3"});
}

TEST_CASE("ols with y orthogonal to the slopes gives the mean as intercept") {
  fixtures::Rng rng(2);
  auto d = fixtures::shell(30, 1, 2, 0);
  d.x_endog = rng.normal(30, 1);
  d.x_exog.col(1) = rng.normal(30, 1).col(0);
  const Matrix x = regressors(d);
  const Vector e = rng.normal(30, 1).col(0);
  d.y = Vector::Constant(30, 4.0) + annihilator(x) * e;
  const auto fit = fit_ols(d);
  CHECK(std::abs(fit.coefficient("x1")) < 1e-10);
  CHECK(std::abs(fit.coefficient("c2")) < 1e-10);
  CHECK(fit.coefficient("intercept") == doctest::Approx(d.y.mean()).epsilon(1e-12));
}

TEST_CASE("ols matches the normal equations") {
  const auto d = random_ols(50, 3);
  const Matrix x = regressors(d);
  const Vector oracle = (x.transpose() * x).inverse() * x.transpose() * d.y;
  const auto fit = fit_ols(d);
  CHECK(max_abs_diff(fit.coef, oracle) < 1e-10);
  // residuals orthogonal to the regressors
  CHECK((x.transpose() * fit.residuals).cwiseAbs().maxCoeff() < 1e-8 * x.norm() * d.y.norm());
}

TEST_CASE("ols rejects a rank-deficient design and names the column") {
  auto d = random_ols(30, 4);
  d.x_exog.col(2) = 2.0 * d.x_exog.col(1);
  try {
    fit_ols(d);
    FAIL("expected RankError");
  } catch (const RankError& e) {
    CHECK(std::string(e.what()).find("c3") != std::string::npos);
  }
}

TEST_CASE("iv with own regressors reproduces ols") {
  fixtures::Rng rng(5);
  auto d = fixtures::iv_design({.n = 200, .k1 = 2, .m = 2}, rng);
  const auto ols = fit_ols(d);
  d.z_excl = d.x_endog;
  const auto iv = fit_iv_gmm(d);
  CHECK(max_abs_diff(iv.coef, ols.coef) < 1e-10);
}

TEST_CASE("scalar exactly identified iv is the ratio z'y / z'x") {
  auto d = fixtures::shell(6, 1, 0, 1);
  d.y << 1, 2, 3, 4, 5, 6;
  d.x_endog.col(0) << 1, 1, 2, 2, 3, 3;
  d.z_excl.col(0) << 0, 1, 0, 1, 0, 1;
  const auto fit = fit_iv_gmm(d);
  const double oracle = d.z_excl.col(0).dot(d.y) / d.z_excl.col(0).dot(d.x_endog.col(0));
  CHECK(oracle == doctest::Approx(2.0));
  CHECK(fit.coef(0) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(fit.kappa == 1.0);
}

TEST_CASE("exactly identified gmm: moments hold and instrument scale is irrelevant") {
  fixtures::Rng rng(6);
  auto d = fixtures::iv_design({.n = 300, .k1 = 2, .m = 2}, rng);
  const auto fit = fit_iv_gmm(d);
  const Matrix z = instruments(d);
  CHECK((z.transpose() * fit.residuals).cwiseAbs().maxCoeff() < 1e-8 * z.norm() * d.y.norm());
  d.z_excl.col(1) *= 1000.0;
  const auto scaled = fit_iv_gmm(d);
  CHECK(max_abs_diff(scaled.coef, fit.coef) < 1e-10);
}

TEST_CASE("gmm refuses an over-identified model") {
  fixtures::Rng rng(7);
  const auto d = fixtures::iv_design({.n = 100, .k1 = 1, .m = 3}, rng);
  CHECK_THROWS_AS(fit_iv_gmm(d), ValidationError);
}

TEST_CASE("liml on an exactly identified model is gmm with kappa 1") {
  fixtures::Rng rng(8);
  const auto d = fixtures::iv_design({.n = 250, .k1 = 2, .m = 2}, rng);
  const auto liml = fit_liml(d);
  const auto gmm = fit_iv_gmm(d);
  CHECK(std::abs(liml.kappa - 1.0) < 1e-8);
  CHECK(max_abs_diff(liml.coef, gmm.coef) < 1e-8);
}

TEST_CASE("liml matches a brute-force generalized eigenvalue oracle") {
  fixtures::Rng rng(9);
  const auto d = fixtures::iv_design({.n = 40, .k1 = 1, .m = 3, .pi = 0.6, .endogeneity = 0.7}, rng);
  Matrix w(d.n(), 2);
  w << d.y, d.x_endog;
  const Matrix a = w.transpose() * annihilator(d.x_exog) * w;
  const Matrix b = w.transpose() * annihilator(instruments(d)) * w;
  Eigen::EigenSolver<Matrix> es(b.inverse() * a);
  double kappa = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) kappa = std::min(kappa, es.eigenvalues()(i).real());

  const Matrix x = regressors(d);
  const Matrix mz = annihilator(instruments(d));
  const Matrix k = Matrix::Identity(d.n(), d.n()) - kappa * mz;
  const Vector oracle = (x.transpose() * k * x).inverse() * x.transpose() * k * d.y;

  const auto fit = fit_liml(d);
  CHECK(fit.kappa == doctest::Approx(kappa).epsilon(1e-10));
  CHECK(fit.kappa > 1.0);
  CHECK(max_abs_diff(fit.coef, oracle) < 1e-8);
}

TEST_CASE("a duplicated instrument is pruned without changing the fit") {
  fixtures::Rng rng(10);
  auto d = fixtures::iv_design({.n = 150, .k1 = 1, .m = 3}, rng);
  const auto base = fit_liml(d);
  d.z_excl.conservativeResize(Eigen::NoChange, 4);
  d.z_excl.col(3) = d.z_excl.col(1);
  d.instrument_names.push_back("dup");
  const auto dup = fit_liml(d);
  CHECK(max_abs_diff(dup.coef, base.coef) < 1e-10);
  CHECK(dup.m == 3);
  CHECK(dup.dropped_instruments == std::vector<std::string>{"dup"});
}

TEST_CASE("estimators are invariant to exog column order and affine instrument rescaling") {
  fixtures::Rng rng(11);
  auto d = fixtures::iv_design({.n = 300, .k1 = 1, .m = 3}, rng);
  const auto base = fit_liml(d);

  auto swapped = d;
  swapped.x_exog.col(0).swap(swapped.x_exog.col(1));
  std::swap(swapped.exog_names[0], swapped.exog_names[1]);
  const auto sw = fit_liml(swapped);
  for (const auto& name : base.names) CHECK(sw.coefficient(name) == doctest::Approx(base.coefficient(name)).epsilon(1e-9));

  auto affine = d;
  affine.z_excl.col(2) = 3.5 * affine.z_excl.col(2).array() + 12.0;
  const auto af = fit_liml(affine);
  CHECK(max_abs_diff(af.coef, base.coef) < 1e-9);
  CHECK(af.kappa == doctest::Approx(base.kappa).epsilon(1e-10));
}

TEST_CASE("one observation per cluster gives the HC1 covariance") {
  const auto d = random_ols(60, 12);
  const auto fit = fit_ols(d);
  const Matrix x = regressors(d);
  const Matrix bread = (x.transpose() * x).inverse();
  Matrix meat = Matrix::Zero(x.cols(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector xi = x.row(i).transpose();
    meat += xi * xi.transpose() * fit.residuals(i) * fit.residuals(i);
  }
  const double n = 60.0, k = 4.0;
  const Matrix oracle = bread * meat * bread * (n / (n - k));
  CHECK(max_abs_diff(fit.vcov, oracle) < 1e-12 * oracle.cwiseAbs().maxCoeff());
  CHECK(max_abs_diff(cluster_cov(fit, d), fit.vcov) < 1e-14 * oracle.cwiseAbs().maxCoeff());
}

TEST_CASE("cluster covariance: zero residuals, relabeling, symmetry and PSD") {
  fixtures::Rng rng(13);
  auto d = fixtures::iv_design({.n = 240, .k1 = 2, .m = 4, .cluster_size = 4}, rng);
  const auto fit = fit_liml(d);
  CHECK(fit.n_clusters == 60);
  CHECK(max_abs_diff(fit.vcov, fit.vcov.transpose()) == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(fit.vcov);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * fit.vcov.trace());

  auto relabeled = d;
  for (auto& id : relabeled.cluster_ids) id = 1000003 - 17 * id;
  const auto fr = fit_liml(relabeled);
  CHECK(max_abs_diff(fr.vcov, fit.vcov) < 1e-12 * fit.vcov.cwiseAbs().maxCoeff());

  auto exact = fixtures::shell(50, 1, 2, 0, 5);
  exact.x_endog = rng.normal(50, 1);
  exact.x_exog.col(1) = rng.normal(50, 1).col(0);
  exact.y = 2.0 * exact.x_endog.col(0) + exact.x_exog.col(1);
  const auto z = fit_ols(exact);
  CHECK(z.vcov.cwiseAbs().maxCoeff() < 1e-24);
}

TEST_CASE("cluster correction factor") {
  CHECK(cluster_correction(100, 5, 20) == doctest::Approx(20.0 / 19.0 * 99.0 / 95.0));
  CHECK_THROWS_AS(cluster_correction(100, 5, 1), ValidationError);
}

TEST_CASE("liml kappa stays at or above one on random over-identified designs") {
  fixtures::Rng rng(14);
  for (int r = 0; r < 20; ++r) {
    const auto d = fixtures::iv_design({.n = 80, .k1 = 2, .m = 5, .pi = 0.3}, rng);
    CHECK(fit_liml(d).kappa >= 1.0 - 1e-10);
  }
}

TEST_CASE("design validation") {
  auto d = fixtures::shell(3, 2, 1, 2);
  CHECK_THROWS_AS(d.validate(), ValidationError);
  auto e = fixtures::shell(20, 1, 1, 1);
  e.y(3) = std::nan("");
  CHECK_THROWS_AS(e.validate(), ValidationError);
}
