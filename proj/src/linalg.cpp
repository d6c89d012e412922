#include "lowrank/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>
#include <vector>

#include "lowrank/error.hpp"

namespace lowrank {

Matrix SvdFactors::reconstruct() const {
  return left * singular.asDiagonal() * right.transpose();
}

bool allFinite(const Matrix& m) { return m.allFinite(); }

namespace {

extern "C" {
void dgesdd_(const char* jobz, const int* m, const int* n, double* a, const int* lda, double* s,
             double* u, const int* ldu, double* vt, const int* ldvt, double* work,
             const int* lwork, int* iwork, int* info);
void openblas_set_num_threads(int n);
}

// One BLAS thread per call: results must not depend on how many solver runs
// share the process.
void pinBlasThreads() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

SvdFactors jacobiSvd(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

}  // namespace

SvdFactors svd(const Matrix& m) {
  if (!m.allFinite()) fail(ErrorKind::InvalidInput, "svd: non-finite input");
  if (m.size() == 0) return {Matrix(m.rows(), 0), Vector(0), Matrix(m.cols(), 0)};
  pinBlasThreads();
  const int rows = static_cast<int>(m.rows()), cols = static_cast<int>(m.cols());
  const int k = std::min(rows, cols);
  Matrix a = m;
  SvdFactors f{Matrix(rows, k), Vector(k), Matrix()};
  Matrix vt(k, cols);
  std::vector<int> iwork(static_cast<std::size_t>(8 * k));
  int info = 0, lwork = -1;
  double query = 0.0;
  const char jobz = 'S';
  dgesdd_(&jobz, &rows, &cols, a.data(), &rows, f.singular.data(), f.left.data(), &rows,
          vt.data(), &k, &query, &lwork, iwork.data(), &info);
  lwork = static_cast<int>(query);
  std::vector<double> work(static_cast<std::size_t>(std::max(lwork, 1)));
  if (info == 0)
    dgesdd_(&jobz, &rows, &cols, a.data(), &rows, f.singular.data(), f.left.data(), &rows,
            vt.data(), &k, work.data(), &lwork, iwork.data(), &info);
  // Divide and conquer can fail to converge; Jacobi is slower but always does.
  if (info != 0 || !f.singular.allFinite() || !f.left.allFinite() || !vt.allFinite())
    return jacobiSvd(m);
  f.right = vt.transpose();
  return f;
}

SvdFactors truncatedSvd(const Matrix& m, Index rank) {
  SvdFactors f = svd(m);
  const Index k = std::min<Index>(rank, f.singular.size());
  return {f.left.leftCols(k), f.singular.head(k), f.right.leftCols(k)};
}

Index numericalRank(const Matrix& m, double relTol) {
  const Vector s = svd(m).singular;
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return (s.array() > relTol * s(0)).count();
}

Matrix hardThresholdRank(const Matrix& w, Index rank) {
  const Index maxRank = std::min(w.rows(), w.cols());
  if (rank < 1 || rank > maxRank)
    fail(ErrorKind::InvalidRank, "hardThresholdRank: rank " + std::to_string(rank) +
                                     " outside [1, " + std::to_string(maxRank) + "]");
  const SvdFactors f = truncatedSvd(w, rank);
  return f.left * f.singular.asDiagonal() * f.right.transpose();
}

Matrix softThresholdSingular(const Matrix& w, double tau) {
  if (!(tau >= 0.0)) fail(ErrorKind::InvalidInput, "softThresholdSingular: tau must be >= 0");
  if (tau == 0.0) {
    if (!w.allFinite()) fail(ErrorKind::InvalidInput, "softThresholdSingular: non-finite input");
    return w;
  }
  const SvdFactors f = svd(w);
  Index keep = 0;
  while (keep < f.singular.size() && f.singular(keep) > tau) ++keep;
  Matrix out = Matrix::Zero(w.rows(), w.cols());
  if (keep == 0) return out;
  const Vector shrunk = f.singular.head(keep).array() - tau;
  out.noalias() = f.left.leftCols(keep) * shrunk.asDiagonal() * f.right.leftCols(keep).transpose();
  return out;
}

SubspaceProjector SubspaceProjector::spanOf(std::span<const Matrix> mats) {
  if (mats.empty()) fail(ErrorKind::InvalidInput, "spanOf: empty list");
  SubspaceProjector p(mats.front().rows(), mats.front().cols());
  double largest = 0.0;
  for (const auto& m : mats) {
    if (m.rows() != p.rows_ || m.cols() != p.cols_)
      fail(ErrorKind::InvalidInput, "spanOf: inconsistent dimensions");
    if (!m.allFinite()) fail(ErrorKind::InvalidInput, "spanOf: non-finite input");
    largest = std::max(largest, m.norm());
  }
  const double dropBelow = 1e-10 * largest;
  for (const auto& m : mats) {
    Matrix v = m;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : p.basis_) v -= inner(b, v) * b;
    const double nrm = v.norm();
    if (nrm > dropBelow && nrm > 0.0) p.basis_.push_back(v / nrm);
  }
  return p;
}

SubspaceProjector SubspaceProjector::spanOf(std::initializer_list<Matrix> mats) {
  return spanOf(std::span<const Matrix>(mats.begin(), mats.size()));
}

Vector SubspaceProjector::coefficients(const Matrix& x) const {
  if (x.rows() != rows_ || x.cols() != cols_)
    fail(ErrorKind::InvalidInput, "projectSpan: dimension mismatch");
  Vector c(static_cast<Index>(basis_.size()));
  for (std::size_t i = 0; i < basis_.size(); ++i) c(static_cast<Index>(i)) = inner(basis_[i], x);
  return c;
}

Matrix SubspaceProjector::project(const Matrix& x) const {
  const Vector c = coefficients(x);
  Matrix out = Matrix::Zero(rows_, cols_);
  for (std::size_t i = 0; i < basis_.size(); ++i) out += c(static_cast<Index>(i)) * basis_[i];
  return out;
}

Matrix projectSpan(const Matrix& x, const SubspaceProjector& p) { return p.project(x); }

}  // namespace lowrank
