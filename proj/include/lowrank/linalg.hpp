#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lowrank {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thin singular value decomposition, singular values nonincreasing.
struct SvdFactors {
  Matrix left;
  Vector singular;
  Matrix right;

  Matrix reconstruct() const;
};

/// Trace inner product <A, B>.
inline double inner(const Matrix& a, const Matrix& b) {
  return (a.array() * b.array()).sum();
}

bool allFinite(const Matrix& m);

SvdFactors svd(const Matrix& m);

/// Leading `rank` singular triplets of `m`.
SvdFactors truncatedSvd(const Matrix& m, Index rank);

/// Number of singular values above relTol * sigma_max.
Index numericalRank(const Matrix& m, double relTol = 1e-8);

/// Nearest matrix of rank at most `rank` in Frobenius norm (Eckart-Young).
///
/// When sigma_r == sigma_{r+1} the first r triplets in decomposition order are
/// kept, so the result is one minimizer among several. Throws
/// ErrorKind::InvalidRank unless 1 <= rank <= min(rows, cols).
Matrix hardThresholdRank(const Matrix& w, Index rank);

/// Shrinks every singular value by tau, flooring at zero.
Matrix softThresholdSingular(const Matrix& w, double tau);

/// Orthogonal projector onto a linear subspace of matrices, stored as an
/// orthonormal basis under the trace inner product.
class SubspaceProjector {
 public:
  SubspaceProjector(Index rows, Index cols) : rows_(rows), cols_(cols) {}

  /// Gram-Schmidt (two passes) over `mats`; an element is dropped when its
  /// residual norm falls below 1e-10 times the largest input norm.
  static SubspaceProjector spanOf(std::span<const Matrix> mats);
  static SubspaceProjector spanOf(std::initializer_list<Matrix> mats);

  Index ambientRows() const noexcept { return rows_; }
  Index ambientCols() const noexcept { return cols_; }
  std::size_t dimension() const noexcept { return basis_.size(); }
  bool empty() const noexcept { return basis_.empty(); }
  const std::vector<Matrix>& basis() const noexcept { return basis_; }

  /// Coefficients <B_i, x> in the basis.
  Vector coefficients(const Matrix& x) const;
  Matrix project(const Matrix& x) const;

 private:
  Index rows_;
  Index cols_;
  std::vector<Matrix> basis_;
};

Matrix projectSpan(const Matrix& x, const SubspaceProjector& p);

}  // namespace lowrank
