#include "growthiv/diagnostics.hpp"

#include "growthiv/error.hpp"
#include "growthiv/stats.hpp"

#include <cmath>
#include <limits>

namespace growthiv {

using linalg::orthonormal_basis;

double DiagnosticsReport::ap_f(const std::string& endog_name) const {
  for (const auto& [name, value] : ap_partial_f) {
    if (name == endog_name) return value;
  }
  throw ValidationError("no AP partial F for '" + endog_name + "'");
}

ReducedForm reduced_form(const DesignMatrices& raw) {
  raw.validate();
  const DesignMatrices d = prune_instruments(raw);
  if (d.m() < d.k_endog()) {
    throw ValidationError("under-identified: m=" + std::to_string(d.m()) + " < k1=" + std::to_string(d.k_endog()));
  }
  ReducedForm rf;
  const Matrix q2 = orthonormal_basis(d.x_exog).q;
  rf.x_tilde = linalg::annihilate(q2, d.x_endog);
  rf.z_tilde = linalg::annihilate(q2, d.z_excl);
  rf.x_tilde = rf.x_tilde * linalg::column_scale(rf.x_tilde).cwiseInverse().asDiagonal();
  rf.z_tilde = rf.z_tilde * linalg::column_scale(rf.z_tilde).cwiseInverse().asDiagonal();
  rf.zz = linalg::symmetrize(rf.z_tilde.transpose() * rf.z_tilde);
  Eigen::LLT<Matrix> llt(rf.zz);
  if (llt.info() != Eigen::Success) throw RankError("partialled instruments are collinear");
  rf.pi = llt.solve(rf.z_tilde.transpose() * rf.x_tilde);
  rf.resid = rf.x_tilde - rf.z_tilde * rf.pi;
  rf.n_clusters = dense_clusters(d.cluster_ids, rf.cluster);
  rf.k_exog = d.k_exog();
  return rf;
}

namespace {

// Covariance of vec(pi) (column-major, m*k) given first-stage residuals `e`.
Matrix vec_pi_covariance(const ReducedForm& rf, const Matrix& e, Weighting w, bool lm) {
  const int m = rf.m();
  const int k = rf.k();
  const Matrix zz_inv = linalg::spd_inverse(rf.zz);
  const double n = static_cast<double>(rf.n());
  if (w == Weighting::homoskedastic) {
    const double dof = lm ? n : n - rf.k_exog - m;
    if (dof <= 0) throw ValidationError("first stage has no residual degrees of freedom");
    const Matrix sigma = (e.transpose() * e) / dof;
    Matrix out(m * k, m * k);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        out.block(a * m, b * m, m, m) = sigma(a, b) * zz_inv;
      }
    }
    return out;
  }
  if (rf.n_clusters < 2) throw ValidationError("cluster-robust first stage needs at least two clusters");
  // Per-observation score e_i (x) z_i, summed within clusters.
  Matrix scores(rf.n(), m * k);
  for (int a = 0; a < k; ++a) {
    scores.middleCols(a * m, m) = rf.z_tilde.array().colwise() * e.col(a).array();
  }
  const Matrix s = linalg::group_sums(scores, rf.cluster, rf.n_clusters);
  Matrix meat = s.transpose() * s;
  if (!lm) {
    const double g = rf.n_clusters;
    meat *= g / (g - 1.0) * (n - 1.0) / (n - rf.k_exog - m);
  }
  Matrix out(m * k, m * k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      out.block(a * m, b * m, m, m) = zz_inv * meat.block(a * m, b * m, m, m) * zz_inv;
    }
  }
  return linalg::symmetrize(out);
}

// Kronecker product A (x) B.
Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Vector vec(const Matrix& a) { return Eigen::Map<const Vector>(a.data(), a.size()); }

double quadratic_form_inverse(const Vector& v, const Matrix& s) {
  Eigen::LDLT<Matrix> ldlt(linalg::symmetrize(s));
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Vector sol = ldlt.solve(v);
    if (sol.allFinite()) return v.dot(sol);
  }
  return v.dot(linalg::symmetric_pinv(s) * v);
}

}  // namespace

double kp_rank_statistic(const ReducedForm& rf, Weighting w, bool lm) {
  const int m = rf.m();
  const int k = rf.k();
  const int r = k - 1;
  // Theta = F pi G with F'F = Z'Z and G = (upper Cholesky of X'X)^{-1}.
  Eigen::LLT<Matrix> lz(rf.zz);
  const Matrix f = lz.matrixU();
  Eigen::LLT<Matrix> lx(linalg::symmetrize(rf.x_tilde.transpose() * rf.x_tilde));
  if (lx.info() != Eigen::Success) throw RankError("partialled endogenous regressors are collinear");
  const Matrix gu = lx.matrixU();
  const Matrix g = gu.triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
  const Matrix theta = f * rf.pi * g;

  Eigen::JacobiSVD<Matrix> svd(theta, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix u2 = svd.matrixU().rightCols(m - r);
  const Matrix v2 = svd.matrixV().rightCols(k - r);
  const Vector lambda = vec(u2.transpose() * theta * v2);

  Matrix e = rf.resid;
  if (lm) {
    // Residuals at the rank-reduced estimate: drop the smallest singular value.
    Vector sv = svd.singularValues();
    sv(sv.size() - 1) = 0.0;
    Matrix s_full = Matrix::Zero(m, k);
    for (Eigen::Index i = 0; i < sv.size(); ++i) s_full(i, i) = sv(i);
    const Matrix theta_r = svd.matrixU() * s_full * svd.matrixV().transpose();
    const Matrix pi_r = lz.matrixU().solve(theta_r) * gu;
    e = rf.x_tilde - rf.z_tilde * pi_r;
  }
  const Matrix v_pi = vec_pi_covariance(rf, e, w, lm);
  // vec(F pi G) = (G' (x) F) vec(pi); lambda = (V2' (x) U2') vec(theta).
  const Matrix t = kron(v2.transpose(), u2.transpose()) * kron(g.transpose(), f);
  const Matrix omega = t * v_pi * t.transpose();
  return quadratic_form_inverse(lambda, omega);
}

double kp_wald_f(const ReducedForm& rf, Weighting w) {
  return kp_rank_statistic(rf, w, false) / rf.m();
}

double kp_wald_f(const DesignMatrices& d, Weighting w) { return kp_wald_f(reduced_form(d), w); }

TestResult underid_test(const ReducedForm& rf, Weighting w) {
  TestResult t;
  t.df = rf.m() - rf.k() + 1;
  if (w == Weighting::cluster) {
    t.stat = kp_rank_statistic(rf, w, true);
  } else {
    // Smallest squared canonical correlation between x_tilde and z_tilde.
    const Matrix xx = linalg::symmetrize(rf.x_tilde.transpose() * rf.x_tilde);
    const Matrix xpx = linalg::symmetrize(rf.x_tilde.transpose() * rf.z_tilde * rf.pi);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(xpx, xx, Eigen::EigenvaluesOnly);
    t.stat = static_cast<double>(rf.n()) * es.eigenvalues().minCoeff();
  }
  t.p = stats::chi2_sf(t.stat, t.df);
  return t;
}

TestResult underid_test(const DesignMatrices& d, Weighting w) { return underid_test(reduced_form(d), w); }

double ap_partial_f(const DesignMatrices& raw, int j) {
  raw.validate();
  const DesignMatrices d = prune_instruments(raw);
  const int k1 = d.k_endog();
  const int m = d.m();
  if (j < 0 || j >= k1) throw ValidationError("endogenous index out of range");
  const int df = m - (k1 - 1);
  if (df <= 0) throw ValidationError("AP partial F undefined: m - (k1 - 1) <= 0");

  Matrix zfull(d.n(), d.k_exog() + m);
  zfull << d.x_exog, d.z_excl;
  const Matrix qz = orthonormal_basis(zfull).q;

  // Replace the other endogenous regressors by their first-stage fits.
  Matrix w(d.n(), (k1 - 1) + d.k_exog());
  int col = 0;
  for (int i = 0; i < k1; ++i) {
    if (i == j) continue;
    w.col(col++) = qz * (qz.transpose() * d.x_endog.col(i));
  }
  w.rightCols(d.k_exog()) = d.x_exog;
  const Matrix qw = orthonormal_basis(w).q;

  const Vector xj = linalg::annihilate(qw, d.x_endog.col(j));
  const Matrix zt = linalg::annihilate(qw, d.z_excl);
  const Matrix qa = orthonormal_basis(zt, 1e-8).q;

  const Vector gamma = qa.transpose() * xj;
  const Vector resid = xj - qa * gamma;

  std::vector<int> cluster;
  const int g = dense_clusters(d.cluster_ids, cluster);
  if (g < 2) throw ValidationError("AP partial F needs at least two clusters");
  Matrix scores = qa.array().colwise() * resid.array();
  const Matrix s = linalg::group_sums(scores, cluster, g);
  const double n = static_cast<double>(d.n());
  const double c = static_cast<double>(g) / (g - 1.0) * (n - 1.0) / (n - d.k_exog() - m);
  const Matrix cov = c * (s.transpose() * s);
  if (cov.cwiseAbs().maxCoeff() == 0.0) {
    return gamma.squaredNorm() > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return quadratic_form_inverse(gamma, cov) / df;
}

TestResult hansen_j(const FitResult& fit, const DesignMatrices& raw) {
  if (fit.method == Method::ols) throw ValidationError("Hansen J needs an IV or LIML fit");
  raw.validate();
  const DesignMatrices d = prune_instruments(raw);
  if (fit.residuals.size() != d.n()) throw ValidationError("fit residuals do not match the design");
  TestResult t;
  t.df = d.m() - d.k_endog();
  if (t.df <= 0) {
    t.df = 0;
    return t;
  }
  Matrix zfull(d.n(), d.k_exog() + d.m());
  zfull << d.x_exog, d.z_excl;
  const Matrix q = orthonormal_basis(zfull).q;
  const Vector moments = q.transpose() * fit.residuals;
  std::vector<int> cluster;
  const int g = dense_clusters(d.cluster_ids, cluster);
  const Matrix scores = q.array().colwise() * fit.residuals.array();
  const Matrix s = linalg::group_sums(scores, cluster, g);
  const Matrix sh = linalg::symmetrize(s.transpose() * s);
  Eigen::LLT<Matrix> llt(sh);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const Vector sol = llt.solve(moments);
    ok = sol.allFinite();
    if (ok) t.stat = moments.dot(sol);
  }
  if (!ok) {
    t.stat = moments.dot(linalg::symmetric_pinv(sh) * moments);
    t.generalized_inverse = true;
  }
  t.p = stats::chi2_sf(t.stat, t.df);
  return t;
}

TestResult hausman(const FitResult& ols, const FitResult& iv) {
  const int k1 = iv.k_endog;
  if (ols.names.size() < static_cast<std::size_t>(k1)) throw ValidationError("Hausman: OLS fit too small");
  for (int i = 0; i < k1; ++i) {
    if (ols.names[static_cast<std::size_t>(i)] != iv.names[static_cast<std::size_t>(i)]) {
      throw ValidationError("Hausman: coefficient names differ ('" + ols.names[static_cast<std::size_t>(i)] +
                            "' vs '" + iv.names[static_cast<std::size_t>(i)] + "')");
    }
  }
  if (!ols.has_vcov() || !iv.has_vcov()) throw ValidationError("Hausman: both fits need a covariance");
  const Vector q = iv.coef.head(k1) - ols.coef.head(k1);
  const Matrix vd = linalg::symmetrize(iv.vcov.topLeftCorner(k1, k1) - ols.vcov.topLeftCorner(k1, k1));
  TestResult t;
  t.df = k1;
  Eigen::SelfAdjointEigenSolver<Matrix> es(vd);
  const Vector& ev = es.eigenvalues();
  const double tol = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const Vector proj = es.eigenvectors().transpose() * q;
  double stat = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > tol) {
      stat += proj(i) * proj(i) / ev(i);
    } else {
      t.generalized_inverse = true;
    }
  }
  t.stat = stat;
  t.p = stats::chi2_sf(stat, t.df);
  return t;
}

DiagnosticsReport diagnose(const DesignMatrices& d, const FitResult& iv, const FitResult* ols) {
  DiagnosticsReport r;
  const ReducedForm rf = reduced_form(d);
  r.kp_wald_f = kp_wald_f(rf, Weighting::cluster);
  r.underid = underid_test(rf, Weighting::cluster);
  const TestResult hj = hansen_j(iv, d);
  if (hj.df > 0) r.hansen_j = hj;
  for (int j = 0; j < d.k_endog(); ++j) {
    r.ap_partial_f.emplace_back(d.endog_names[static_cast<std::size_t>(j)], ap_partial_f(d, j));
  }
  if (ols != nullptr) r.hausman = hausman(*ols, iv);
  return r;
}

}  // namespace growthiv
