#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lowrank/linalg.hpp"
#include "lowrank/random.hpp"

namespace lowrank {

struct Entry {
  Index row;
  Index col;
  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Linear map X -> (<A_1, X>, ..., <A_m, X>).
///
/// DenseEnsemble stores every sensing matrix explicitly (m * rows * cols
/// scalars; meant for m <= 1e4 and dimensions <= 64). EntrySampling stores
/// index pairs and a common scale, so A_l = scale * e_i e_j^T.
class MeasurementOp {
 public:
  enum class Kind { DenseEnsemble, EntrySampling };

  static MeasurementOp denseEnsemble(std::span<const Matrix> sensing);

  /// Throws InvalidInput on duplicate or out-of-range indices, or scale <= 0.
  static MeasurementOp entrySampling(Index rows, Index cols, std::vector<Entry> indices,
                                     double scale);
  /// Default scale sqrt(rows * cols), which makes (1/m)|A(X)|^2 an unbiased
  /// estimate of |X|_F^2 under uniform sampling.
  static MeasurementOp entrySampling(Index rows, Index cols, std::vector<Entry> indices);

  Kind kind() const noexcept { return kind_; }
  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index measurementCount() const noexcept { return m_; }
  double scale() const noexcept { return scale_; }
  const std::vector<Entry>& indices() const noexcept { return entries_; }

  /// Sensing matrix A_l materialized (for tests and small problems).
  Matrix sensingMatrix(Index l) const;
  /// <A_l, X>
  double functional(Index l, const Matrix& x) const;
  /// g += c * A_l
  void accumulate(Index l, double c, Matrix& g) const;
  /// (<A_1, X>, ..., <A_m, X>)
  Vector apply(const Matrix& x) const;
  /// A^T v = sum_l v_l A_l
  Matrix adjoint(const Vector& v) const;
  /// Mean of |A_l|_F^2 over all functionals.
  double meanSquaredNorm() const;

  void checkShape(const Matrix& x) const;

 private:
  MeasurementOp() = default;

  Kind kind_ = Kind::EntrySampling;
  Index rows_ = 0;
  Index cols_ = 0;
  Index m_ = 0;
  double scale_ = 1.0;
  std::vector<Entry> entries_;
  // Row l holds vec(A_l) in column-major order.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sensing_;
};

Vector applyOp(const MeasurementOp& op, const Matrix& x);

/// Measurements y for rank budget r, with the ground truth kept for
/// evaluation only.
struct ProblemInstance {
  ProblemInstance(MeasurementOp op, Vector y, Index rankBudget,
                  std::optional<Matrix> truth = std::nullopt, bool noiseless = false);

  MeasurementOp op;
  Vector y;
  Index rankBudget;
  std::optional<Matrix> truth;
  bool noiseless;

  Index m() const noexcept { return op.measurementCount(); }
};

/// Sorted, distinct measurement indices drawn for one inner step.
struct IndexBatch {
  std::vector<Index> indices;
  std::uint64_t stream = 0;

  std::size_t size() const noexcept { return indices.size(); }
  static IndexBatch all(Index m);
  static IndexBatch single(Index l);
};

/// Draws batches uniformly without replacement within a batch; successive
/// draws are independent.
class BatchSampler {
 public:
  BatchSampler(Index m, Index batchSize, std::uint64_t seed);
  IndexBatch next();
  Index batchSize() const noexcept { return batch_; }

 private:
  Index m_;
  Index batch_;
  std::uint64_t seed_;
  Rng rng_;
  std::vector<char> taken_;
};

/// F(X) = (1/m) |y - A(X)|^2
double objective(const ProblemInstance& inst, const Matrix& x);
/// |y - A(X)|^2
double residualNorm2(const ProblemInstance& inst, const Matrix& x);

/// (2/m) sum_l A_l (<A_l, X> - y_l)
Matrix fullGradient(const ProblemInstance& inst, const Matrix& x);
/// Same, from a precomputed residual vector A(X) - y.
Matrix gradientFromResidual(const ProblemInstance& inst, const Vector& residual);

/// (2/|B|) sum_{l in B} A_l (<A_l, X> - y_l). A batch covering every
/// measurement takes the full-gradient path, so both agree bit for bit.
Matrix stochasticGradient(const ProblemInstance& inst, const Matrix& x, const IndexBatch& batch);
Matrix stochasticGradientFromResidual(const ProblemInstance& inst, const Vector& residual,
                                      const IndexBatch& batch);

/// grad f_B(X_t) - (grad f_B(snapshot) - gk); gk must be the full gradient at
/// the snapshot. The correction is grouped so that it vanishes exactly when
/// the batch is the full index set; at xt == snapshot the result is gk.
Matrix varianceReducedDirection(const ProblemInstance& inst, const Matrix& xt,
                                const Matrix& snapshot, const Matrix& gk,
                                const IndexBatch& batch);

struct RipBounds {
  double lower;
  double upper;
};

/// Extreme values of (1/m)|A(Z)|^2 / |Z|_F^2 over nonzero Z in span(p), as the
/// extreme eigenvalues of the Gram form (1/m)<A(B_i), A(B_j)>.
RipBounds estimateSubspaceRip(const MeasurementOp& op, const SubspaceProjector& p);
/// Same with the functionals restricted to `batch` and normalized by |batch|.
RipBounds estimateSubspaceRip(const MeasurementOp& op, const SubspaceProjector& p,
                              const IndexBatch& batch);

}  // namespace lowrank
