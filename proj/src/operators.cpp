#include "lowrank/operators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lowrank/error.hpp"

namespace lowrank {

namespace {

Eigen::Map<const Vector> vec(const Matrix& x) { return {x.data(), x.size()}; }

void checkBatch(const IndexBatch& batch, Index m) {
  if (batch.indices.empty()) fail(ErrorKind::InvalidInput, "empty batch");
  for (std::size_t i = 0; i < batch.indices.size(); ++i) {
    const Index l = batch.indices[i];
    if (l < 0 || l >= m) fail(ErrorKind::InvalidInput, "batch index out of range");
    if (i > 0 && l <= batch.indices[i - 1])
      fail(ErrorKind::InvalidInput, "batch indices must be sorted and distinct");
  }
}

bool coversAll(const IndexBatch& batch, Index m) {
  return static_cast<Index>(batch.indices.size()) == m;
}

}  // namespace

MeasurementOp MeasurementOp::denseEnsemble(std::span<const Matrix> sensing) {
  if (sensing.empty()) fail(ErrorKind::InvalidInput, "denseEnsemble: no sensing matrices");
  MeasurementOp op;
  op.kind_ = Kind::DenseEnsemble;
  op.rows_ = sensing.front().rows();
  op.cols_ = sensing.front().cols();
  op.m_ = static_cast<Index>(sensing.size());
  op.sensing_.resize(op.m_, op.rows_ * op.cols_);
  for (Index l = 0; l < op.m_; ++l) {
    const Matrix& a = sensing[static_cast<std::size_t>(l)];
    if (a.rows() != op.rows_ || a.cols() != op.cols_)
      fail(ErrorKind::InvalidInput, "denseEnsemble: sensing matrices differ in shape");
    if (!a.allFinite()) fail(ErrorKind::InvalidInput, "denseEnsemble: non-finite sensing matrix");
    op.sensing_.row(l) = vec(a).transpose();
  }
  return op;
}

MeasurementOp MeasurementOp::entrySampling(Index rows, Index cols, std::vector<Entry> indices,
                                           double scale) {
  if (rows < 1 || cols < 1) fail(ErrorKind::InvalidInput, "entrySampling: empty ambient shape");
  if (!(scale > 0.0) || !std::isfinite(scale))
    fail(ErrorKind::InvalidInput, "entrySampling: scale must be positive");
  if (indices.empty()) fail(ErrorKind::InvalidInput, "entrySampling: no indices");
  std::vector<char> seen(static_cast<std::size_t>(rows * cols), 0);
  for (const auto& e : indices) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
      fail(ErrorKind::InvalidInput, "entrySampling: index out of bounds");
    char& s = seen[static_cast<std::size_t>(e.col * rows + e.row)];
    if (s) fail(ErrorKind::InvalidInput, "entrySampling: duplicate index");
    s = 1;
  }
  MeasurementOp op;
  op.kind_ = Kind::EntrySampling;
  op.rows_ = rows;
  op.cols_ = cols;
  op.m_ = static_cast<Index>(indices.size());
  op.scale_ = scale;
  op.entries_ = std::move(indices);
  return op;
}

MeasurementOp MeasurementOp::entrySampling(Index rows, Index cols, std::vector<Entry> indices) {
  return entrySampling(rows, cols, std::move(indices),
                       std::sqrt(static_cast<double>(rows) * static_cast<double>(cols)));
}

void MeasurementOp::checkShape(const Matrix& x) const {
  if (x.rows() != rows_ || x.cols() != cols_)
    fail(ErrorKind::InvalidInput, "measurement operator: expected " + std::to_string(rows_) +
                                      "x" + std::to_string(cols_) + " matrix, got " +
                                      std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
}

Matrix MeasurementOp::sensingMatrix(Index l) const {
  Matrix a = Matrix::Zero(rows_, cols_);
  accumulate(l, 1.0, a);
  return a;
}

double MeasurementOp::functional(Index l, const Matrix& x) const {
  if (kind_ == Kind::EntrySampling) {
    const Entry& e = entries_[static_cast<std::size_t>(l)];
    return scale_ * x(e.row, e.col);
  }
  return sensing_.row(l).dot(vec(x));
}

void MeasurementOp::accumulate(Index l, double c, Matrix& g) const {
  if (kind_ == Kind::EntrySampling) {
    const Entry& e = entries_[static_cast<std::size_t>(l)];
    g(e.row, e.col) += c * scale_;
    return;
  }
  Eigen::Map<Vector>(g.data(), g.size()) += c * sensing_.row(l).transpose();
}

Matrix MeasurementOp::adjoint(const Vector& v) const {
  if (v.size() != m_) fail(ErrorKind::InvalidInput, "adjoint: vector length mismatch");
  Matrix g = Matrix::Zero(rows_, cols_);
  if (kind_ == Kind::EntrySampling) {
    for (Index l = 0; l < m_; ++l) {
      const Entry& e = entries_[static_cast<std::size_t>(l)];
      g(e.row, e.col) += scale_ * v(l);
    }
    return g;
  }
  Eigen::Map<Vector>(g.data(), g.size()).noalias() = sensing_.transpose() * v;
  return g;
}

double MeasurementOp::meanSquaredNorm() const {
  if (kind_ == Kind::EntrySampling) return scale_ * scale_;
  return sensing_.squaredNorm() / static_cast<double>(m_);
}

Vector MeasurementOp::apply(const Matrix& x) const {
  checkShape(x);
  if (kind_ == Kind::DenseEnsemble) return sensing_ * vec(x);
  Vector y(m_);
  for (Index l = 0; l < m_; ++l) y(l) = functional(l, x);
  return y;
}

Vector applyOp(const MeasurementOp& op, const Matrix& x) { return op.apply(x); }

ProblemInstance::ProblemInstance(MeasurementOp op_, Vector y_, Index rankBudget_,
                                 std::optional<Matrix> truth_, bool noiseless_)
    : op(std::move(op_)),
      y(std::move(y_)),
      rankBudget(rankBudget_),
      truth(std::move(truth_)),
      noiseless(noiseless_) {
  if (y.size() != op.measurementCount())
    fail(ErrorKind::InvalidInput, "problem instance: y length differs from measurement count");
  if (!y.allFinite()) fail(ErrorKind::InvalidInput, "problem instance: non-finite measurements");
  if (rankBudget < 1 || rankBudget > std::min(op.rows(), op.cols()))
    fail(ErrorKind::InvalidRank, "problem instance: rank budget out of range");
  if (truth) op.checkShape(*truth);
}

IndexBatch IndexBatch::all(Index m) {
  IndexBatch b;
  b.indices.resize(static_cast<std::size_t>(m));
  for (Index l = 0; l < m; ++l) b.indices[static_cast<std::size_t>(l)] = l;
  return b;
}

IndexBatch IndexBatch::single(Index l) {
  IndexBatch b;
  b.indices = {l};
  return b;
}

BatchSampler::BatchSampler(Index m, Index batchSize, std::uint64_t seed)
    : m_(m), batch_(batchSize), seed_(seed), rng_(seed), taken_(static_cast<std::size_t>(m), 0) {
  if (batchSize < 1 || batchSize > m)
    fail(ErrorKind::Configuration, "batch size must lie in [1, m]");
}

IndexBatch BatchSampler::next() {
  if (batch_ == m_) {
    IndexBatch b = IndexBatch::all(m_);
    b.stream = seed_;
    return b;
  }
  IndexBatch b;
  b.stream = seed_;
  b.indices.reserve(static_cast<std::size_t>(batch_));
  std::uniform_int_distribution<Index> pick(0, m_ - 1);
  while (static_cast<Index>(b.indices.size()) < batch_) {
    const Index l = pick(rng_);
    char& t = taken_[static_cast<std::size_t>(l)];
    if (t) continue;
    t = 1;
    b.indices.push_back(l);
  }
  for (Index l : b.indices) taken_[static_cast<std::size_t>(l)] = 0;
  std::sort(b.indices.begin(), b.indices.end());
  return b;
}

double residualNorm2(const ProblemInstance& inst, const Matrix& x) {
  return (applyOp(inst.op, x) - inst.y).squaredNorm();
}

double objective(const ProblemInstance& inst, const Matrix& x) {
  return residualNorm2(inst, x) / static_cast<double>(inst.m());
}

Matrix gradientFromResidual(const ProblemInstance& inst, const Vector& residual) {
  Matrix g = inst.op.adjoint(residual);
  g *= 2.0 / static_cast<double>(inst.m());
  return g;
}

Matrix fullGradient(const ProblemInstance& inst, const Matrix& x) {
  return gradientFromResidual(inst, applyOp(inst.op, x) - inst.y);
}

Matrix stochasticGradientFromResidual(const ProblemInstance& inst, const Vector& residual,
                                      const IndexBatch& batch) {
  checkBatch(batch, inst.m());
  if (coversAll(batch, inst.m())) return gradientFromResidual(inst, residual);
  Matrix g = Matrix::Zero(inst.op.rows(), inst.op.cols());
  for (Index l : batch.indices) inst.op.accumulate(l, residual(l), g);
  g *= 2.0 / static_cast<double>(batch.size());
  return g;
}

Matrix stochasticGradient(const ProblemInstance& inst, const Matrix& x, const IndexBatch& batch) {
  inst.op.checkShape(x);
  checkBatch(batch, inst.m());
  if (coversAll(batch, inst.m())) return fullGradient(inst, x);
  Matrix g = Matrix::Zero(inst.op.rows(), inst.op.cols());
  for (Index l : batch.indices) inst.op.accumulate(l, inst.op.functional(l, x) - inst.y(l), g);
  g *= 2.0 / static_cast<double>(batch.size());
  return g;
}

Matrix varianceReducedDirection(const ProblemInstance& inst, const Matrix& xt,
                                const Matrix& snapshot, const Matrix& gk,
                                const IndexBatch& batch) {
  inst.op.checkShape(gk);
  inst.op.checkShape(xt);
  inst.op.checkShape(snapshot);
  // Stochastic terms cancel exactly at the snapshot.
  if (xt == snapshot) {
    if (batch.indices.empty()) fail(ErrorKind::InvalidInput, "empty batch");
    return gk;
  }
  const Matrix current = stochasticGradient(inst, xt, batch);
  const Matrix anchor = stochasticGradient(inst, snapshot, batch);
  return current - (anchor - gk);
}

namespace {

RipBounds gramExtremes(const Matrix& images, double norm) {
  const Matrix gram = (images.transpose() * images) / norm;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

}  // namespace

RipBounds estimateSubspaceRip(const MeasurementOp& op, const SubspaceProjector& p) {
  if (p.empty()) fail(ErrorKind::InvalidInput, "estimateSubspaceRip: empty basis");
  if (p.ambientRows() != op.rows() || p.ambientCols() != op.cols())
    fail(ErrorKind::InvalidInput, "estimateSubspaceRip: dimension mismatch");
  Matrix images(op.measurementCount(), static_cast<Index>(p.dimension()));
  for (std::size_t i = 0; i < p.dimension(); ++i)
    images.col(static_cast<Index>(i)) = applyOp(op, p.basis()[i]);
  return gramExtremes(images, static_cast<double>(op.measurementCount()));
}

RipBounds estimateSubspaceRip(const MeasurementOp& op, const SubspaceProjector& p,
                              const IndexBatch& batch) {
  if (p.empty()) fail(ErrorKind::InvalidInput, "estimateSubspaceRip: empty basis");
  checkBatch(batch, op.measurementCount());
  Matrix images(static_cast<Index>(batch.size()), static_cast<Index>(p.dimension()));
  for (std::size_t i = 0; i < p.dimension(); ++i)
    for (std::size_t k = 0; k < batch.size(); ++k)
      images(static_cast<Index>(k), static_cast<Index>(i)) =
          op.functional(batch.indices[k], p.basis()[i]);
  return gramExtremes(images, static_cast<double>(batch.size()));
}

}  // namespace lowrank
