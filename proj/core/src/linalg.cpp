#include "growthiv/linalg.hpp"

#include "growthiv/error.hpp"

#include <algorithm>
#include <cmath>

namespace growthiv::linalg {

ColumnBasis orthonormal_basis(const Matrix& a, double rel_tol) {
  const Eigen::Index n = a.rows();
  ColumnBasis out;
  out.q.resize(n, a.cols());
  int rank = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    Vector v = a.col(j);
    const double norm0 = v.norm();
    if (norm0 == 0.0) {
      out.dependent.push_back(static_cast<int>(j));
      continue;
    }
    // Two passes of modified Gram-Schmidt keep the basis orthogonal to
    // working precision.
    for (int pass = 0; pass < 2; ++pass) {
      for (int k = 0; k < rank; ++k) {
        v -= out.q.col(k).dot(v) * out.q.col(k);
      }
    }
    const double norm1 = v.norm();
    if (norm1 <= rel_tol * norm0) {
      out.dependent.push_back(static_cast<int>(j));
      continue;
    }
    out.q.col(rank++) = v / norm1;
    out.kept.push_back(static_cast<int>(j));
  }
  out.q.conservativeResize(n, rank);
  return out;
}

Matrix annihilate(const Matrix& q, const Matrix& a) {
  if (q.cols() == 0) return a;
  return a - q * (q.transpose() * a);
}

Matrix symmetric_pinv(const Matrix& s, double rel_tol, int* rank, int* negative) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s));
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigen-decomposition failed in pseudo-inverse");
  }
  const Vector& ev = es.eigenvalues();
  const double cutoff = rel_tol * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  Vector inv = Vector::Zero(ev.size());
  int r = 0;
  int neg = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > cutoff && ev(i) != 0.0) {
      inv(i) = 1.0 / ev(i);
      ++r;
      if (ev(i) < 0.0) ++neg;
    }
  }
  if (rank) *rank = r;
  if (negative) *negative = neg;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Matrix spd_inverse(const Matrix& s) {
  Eigen::LLT<Matrix> llt(symmetrize(s));
  if (llt.info() != Eigen::Success) {
    throw RankError("matrix is not positive definite");
  }
  return llt.solve(Matrix::Identity(s.rows(), s.cols()));
}

Matrix symmetric_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s));
  Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Vector column_scale(const Matrix& a) {
  Vector scale(a.cols());
  const double n = std::max<double>(1.0, static_cast<double>(a.rows()));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double rms = a.col(j).norm() / std::sqrt(n);
    scale(j) = rms > 0.0 ? rms : 1.0;
  }
  return scale;
}

Matrix group_sums(const Matrix& a, const std::vector<int>& group, int n_groups) {
  Matrix out = Matrix::Zero(n_groups, a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    out.row(group[static_cast<std::size_t>(i)]) += a.row(i);
  }
  return out;
}

}  // namespace growthiv::linalg
