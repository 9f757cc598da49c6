#pragma once

#include <Eigen/Dense>
#include <vector>

namespace growthiv::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thin orthonormal basis of the column space of A together with the indices
// of the columns that were kept. Columns are scanned left to right; a column
// whose component orthogonal to the previously kept columns has norm below
// tol * (column norm) is reported as dependent.
struct ColumnBasis {
  Matrix q;                       // n x rank, orthonormal columns
  std::vector<int> kept;          // indices into A, ascending
  std::vector<int> dependent;     // indices into A, ascending
};

ColumnBasis orthonormal_basis(const Matrix& a, double rel_tol = 1e-10);

// Residual of A after projecting out span(Q); Q must have orthonormal columns.
Matrix annihilate(const Matrix& q, const Matrix& a);

// Moore-Penrose pseudo-inverse of a symmetric matrix via eigen-decomposition.
// Eigenvalues with |value| <= rel_tol * max|value| are treated as zero.
// `rank` and `negative` (count of negative eigenvalues kept) are reported
// when non-null.
Matrix symmetric_pinv(const Matrix& s, double rel_tol = 1e-12, int* rank = nullptr,
                      int* negative = nullptr);

// Inverse of a symmetric positive definite matrix. Throws RankError if the
// Cholesky factorization fails.
Matrix spd_inverse(const Matrix& s);

// Symmetric square root of a symmetric PSD matrix.
Matrix symmetric_sqrt(const Matrix& s);

// Root-mean-square of each column; zero columns get scale 1.
Vector column_scale(const Matrix& a);

// Sum of rows of `a` within each group. `group` holds dense group indices
// in [0, n_groups).
Matrix group_sums(const Matrix& a, const std::vector<int>& group, int n_groups);

inline Matrix symmetrize(const Matrix& s) { return 0.5 * (s + s.transpose()); }

}  // namespace growthiv::linalg
