#include "growthiv/estimators.hpp"

#include "growthiv/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace growthiv {

using linalg::ColumnBasis;
using linalg::orthonormal_basis;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::ols: return "ols";
    case Method::iv_gmm: return "iv_gmm";
    case Method::liml: return "liml";
  }
  return "unknown";
}

int FitResult::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double FitResult::coefficient(std::string_view name) const {
  const int i = index_of(name);
  if (i < 0) throw ValidationError("no coefficient named '" + std::string(name) + "'");
  return coef(i);
}

double FitResult::std_error(std::string_view name) const {
  const int i = index_of(name);
  if (i < 0) throw ValidationError("no coefficient named '" + std::string(name) + "'");
  if (!has_vcov()) throw ValidationError("fit has no covariance matrix");
  return std::sqrt(std::max(vcov(i, i), 0.0));
}

void DesignMatrices::validate() const {
  const Eigen::Index rows = y.size();
  auto check_rows = [&](const Matrix& m, std::string_view what) {
    if (m.rows() != rows && !(m.cols() == 0)) {
      throw ValidationError(std::string(what) + " has " + std::to_string(m.rows()) + " rows, expected " +
                            std::to_string(rows));
    }
    if (!m.allFinite()) throw ValidationError(std::string(what) + " contains non-finite entries");
  };
  if (!y.allFinite()) throw ValidationError("outcome contains non-finite entries");
  check_rows(x_endog, "X_endog");
  check_rows(x_exog, "X_exog");
  check_rows(z_excl, "Z_excl");
  if (static_cast<Eigen::Index>(cluster_ids.size()) != rows) {
    throw ValidationError("cluster_ids has " + std::to_string(cluster_ids.size()) + " entries, expected " +
                          std::to_string(rows));
  }
  if (endog_names.size() != static_cast<std::size_t>(x_endog.cols()) ||
      exog_names.size() != static_cast<std::size_t>(x_exog.cols()) ||
      instrument_names.size() != static_cast<std::size_t>(z_excl.cols())) {
    throw ValidationError("column name lists do not match matrix widths");
  }
  if (rows <= k_endog() + k_exog()) {
    throw ValidationError("need more observations than regressors (n=" + std::to_string(rows) +
                          ", k=" + std::to_string(k_endog() + k_exog()) + ")");
  }
}

int dense_clusters(const std::vector<long long>& ids, std::vector<int>& dense) {
  std::vector<long long> keys(ids);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  dense.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    dense[i] = static_cast<int>(std::lower_bound(keys.begin(), keys.end(), ids[i]) - keys.begin());
  }
  return static_cast<int>(keys.size());
}

double cluster_correction(Eigen::Index n, int k, int n_clusters) {
  if (n_clusters < 2) throw ValidationError("cluster-robust covariance needs at least two clusters");
  if (n <= k) throw ValidationError("cluster correction needs n > k");
  const double g = n_clusters;
  return g / (g - 1.0) * (static_cast<double>(n) - 1.0) / (static_cast<double>(n) - k);
}

DesignMatrices prune_instruments(const DesignMatrices& d, std::vector<std::string>* dropped) {
  const int k2 = d.k_exog();
  Matrix zfull(d.n(), k2 + d.m());
  zfull << d.x_exog, d.z_excl;
  const ColumnBasis basis = orthonormal_basis(zfull);
  std::vector<int> keep;
  for (int j : basis.kept) {
    if (j >= k2) keep.push_back(j - k2);
  }
  if (static_cast<int>(keep.size()) == d.m()) return d;
  DesignMatrices out = d;
  out.z_excl.resize(d.n(), static_cast<Eigen::Index>(keep.size()));
  out.instrument_names.clear();
  for (std::size_t c = 0; c < keep.size(); ++c) {
    out.z_excl.col(static_cast<Eigen::Index>(c)) = d.z_excl.col(keep[c]);
    out.instrument_names.push_back(d.instrument_names[static_cast<std::size_t>(keep[c])]);
  }
  for (int j : basis.dependent) {
    if (j >= k2 && dropped) dropped->push_back(d.instrument_names[static_cast<std::size_t>(j - k2)]);
  }
  return out;
}

namespace {

// Shared state for one estimation: regressors in scaled units and an
// orthonormal basis of the instrument space.
struct Prepared {
  DesignMatrices d;
  std::vector<std::string> dropped;
  Matrix xs;        // [X_endog, X_exog] divided by column scale
  Vector scale;
  Matrix qz;        // basis of [X_exog, Z_excl]; empty for OLS
  std::vector<int> cluster;
  int n_clusters = 0;
};

void require_exog_rank(const DesignMatrices& d) {
  const ColumnBasis b = orthonormal_basis(d.x_exog);
  if (!b.dependent.empty()) {
    throw RankError("exogenous column '" + d.exog_names[static_cast<std::size_t>(b.dependent.front())] +
                    "' is linearly dependent on earlier columns");
  }
}

Prepared prepare(const DesignMatrices& d, bool instruments) {
  d.validate();
  require_exog_rank(d);
  Prepared p;
  p.d = instruments ? prune_instruments(d, &p.dropped) : d;
  const DesignMatrices& dd = p.d;
  Matrix x(dd.n(), dd.k_endog() + dd.k_exog());
  x << dd.x_endog, dd.x_exog;
  p.scale = linalg::column_scale(x);
  p.xs = x * p.scale.cwiseInverse().asDiagonal();
  if (!instruments) {
    const ColumnBasis b = orthonormal_basis(x);
    if (!b.dependent.empty()) {
      const int j = b.dependent.front();
      const std::string& name = j < dd.k_endog() ? dd.endog_names[static_cast<std::size_t>(j)]
                                                 : dd.exog_names[static_cast<std::size_t>(j - dd.k_endog())];
      throw RankError("regressor '" + name + "' is linearly dependent on earlier columns");
    }
  } else {
    Matrix zfull(dd.n(), dd.k_exog() + dd.m());
    zfull << dd.x_exog, dd.z_excl;
    p.qz = orthonormal_basis(zfull).q;
  }
  p.n_clusters = dense_clusters(dd.cluster_ids, p.cluster);
  return p;
}

std::vector<std::string> coefficient_names(const DesignMatrices& d) {
  std::vector<std::string> names = d.endog_names;
  names.insert(names.end(), d.exog_names.begin(), d.exog_names.end());
  return names;
}

// Bread of the k-class sandwich in scaled units: X'(I - kappa M_Z)X.
Matrix kclass_bread(const Prepared& p, double kappa) {
  Matrix a = p.xs.transpose() * p.xs;
  if (kappa != 0.0) {
    const Matrix mx = linalg::annihilate(p.qz, p.xs);
    a.noalias() -= kappa * (mx.transpose() * mx);
  }
  return linalg::symmetrize(a);
}

Matrix sandwich(const Prepared& p, double kappa, bool projected, const Vector& resid) {
  const int k = static_cast<int>(p.xs.cols());
  const double c = cluster_correction(p.d.n(), k, p.n_clusters);
  const Matrix bread = kclass_bread(p, kappa);
  Eigen::LDLT<Matrix> ldlt(bread);
  const Matrix bread_inv = ldlt.solve(Matrix::Identity(k, k));
  Matrix xhat = projected ? Matrix(p.qz * (p.qz.transpose() * p.xs)) : p.xs;
  xhat.array().colwise() *= resid.array();
  const Matrix s = linalg::group_sums(xhat, p.cluster, p.n_clusters);
  const Matrix meat = s.transpose() * s;
  Matrix v = c * bread_inv * meat * bread_inv;
  const Vector inv_scale = p.scale.cwiseInverse();
  v = inv_scale.asDiagonal() * v * inv_scale.asDiagonal();
  return linalg::symmetrize(v);
}

FitResult finish(const Prepared& p, Method method, double kappa, const Vector& coef_scaled) {
  FitResult f;
  f.method = method;
  f.names = coefficient_names(p.d);
  f.coef = coef_scaled.cwiseQuotient(p.scale);
  f.residuals = p.d.y - p.xs * coef_scaled;
  f.n = static_cast<int>(p.d.n());
  f.k_endog = p.d.k_endog();
  f.k_exog = p.d.k_exog();
  f.m = method == Method::ols ? 0 : p.d.m();
  f.n_clusters = p.n_clusters;
  f.kappa = kappa;
  f.dropped_instruments = p.dropped;
  if (p.n_clusters >= 2) {
    f.vcov = sandwich(p, kappa, method != Method::ols, f.residuals);
  }
  return f;
}

Vector solve_kclass(const Prepared& p, double kappa) {
  const Matrix a = kclass_bread(p, kappa);
  Vector b = p.xs.transpose() * p.d.y;
  if (kappa != 0.0) {
    const Matrix mx = linalg::annihilate(p.qz, p.xs);
    b.noalias() -= kappa * (mx.transpose() * p.d.y);
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw RankError("k-class normal matrix is not positive definite");
  }
  return llt.solve(b);
}

}  // namespace

FitResult fit_ols(const DesignMatrices& d) {
  const Prepared p = prepare(d, false);
  // Least squares through the pivot-free QR of the scaled regressors.
  const Vector coef = p.xs.householderQr().solve(p.d.y);
  return finish(p, Method::ols, 0.0, coef);
}

FitResult fit_iv_gmm(const DesignMatrices& d) {
  const Prepared p = prepare(d, true);
  if (p.d.m() != p.d.k_endog()) {
    throw ValidationError("fit_iv_gmm needs an exactly identified model (m=" + std::to_string(p.d.m()) +
                          ", k1=" + std::to_string(p.d.k_endog()) + "); use fit_liml");
  }
  // Z = QR with R invertible, so Z'X b = Z'y  <=>  Q'X b = Q'y.
  const Matrix zx = p.qz.transpose() * p.xs;
  Eigen::FullPivLU<Matrix> lu(zx);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) throw RankError("Z'X is singular");
  const Vector coef = lu.solve(p.qz.transpose() * p.d.y);
  return finish(p, Method::iv_gmm, 1.0, coef);
}

namespace {

double liml_kappa(const Prepared& p) {
  const DesignMatrices& d = p.d;
  Matrix w(d.n(), 1 + d.k_endog());
  w << d.y, d.x_endog;
  w = w * linalg::column_scale(w).cwiseInverse().asDiagonal();
  const Matrix q2 = orthonormal_basis(d.x_exog).q;
  const Matrix m2w = linalg::annihilate(q2, w);
  const Matrix mzw = linalg::annihilate(p.qz, w);
  const Matrix a = linalg::symmetrize(m2w.transpose() * m2w);
  const Matrix b = linalg::symmetrize(mzw.transpose() * mzw);
  // kappa = min eig(B^{-1}A) = 1 / max eig(L^{-1} B L^{-T}) with A = LL'.
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("LIML: W'M_{X_exog}W is singular");
  }
  const Matrix linv = llt.matrixL().solve(Matrix::Identity(a.rows(), a.cols()));
  const Matrix c = linalg::symmetrize(linv * b * linv.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(c, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("LIML eigen-solver failed");
  const double top = es.eigenvalues().maxCoeff();
  if (!(top > 0.0)) throw NumericalError("LIML: outcome and regressors lie in the instrument space");
  return 1.0 / top;
}

}  // namespace

FitResult fit_liml(const DesignMatrices& d) {
  const Prepared p = prepare(d, true);
  if (p.d.m() < p.d.k_endog()) {
    throw ValidationError("fit_liml needs m >= k1 (m=" + std::to_string(p.d.m()) +
                          ", k1=" + std::to_string(p.d.k_endog()) + ")");
  }
  const double kappa = liml_kappa(p);
  if (!std::isfinite(kappa) || kappa < 1.0 - 1e-6) {
    throw NumericalError("LIML kappa " + std::to_string(kappa) + " below 1; degenerate design");
  }
  const Vector coef = solve_kclass(p, kappa);
  return finish(p, Method::liml, kappa, coef);
}

Matrix cluster_cov(const FitResult& fit, const DesignMatrices& d) {
  const bool iv = fit.method != Method::ols;
  const Prepared p = prepare(d, iv);
  if (p.n_clusters < 2) throw ValidationError("cluster-robust covariance needs at least two clusters");
  const Vector coef_scaled = fit.coef.cwiseProduct(p.scale);
  const Vector resid = p.d.y - p.xs * coef_scaled;
  return sandwich(p, fit.kappa, iv, resid);
}

}  // namespace growthiv
