#include "rrapsp/linalg.hpp"

#include <cmath>
#include <cstdlib>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

#include "rrapsp/error.hpp"
#include "rrapsp/tolerances.hpp"

namespace rrapsp {

namespace {

void requireSameSize(Index a, Index b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

SymMatrix SymMatrix::fromUpper(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("SymMatrix: matrix is not square");
  SymMatrix s;
  s.dim_ = m.rows();
  s.full_ = m.triangularView<Eigen::Upper>();
  s.full_.triangularView<Eigen::StrictlyLower>() = s.full_.transpose();
  return s;
}

SymMatrix SymMatrix::toeplitz(Vector firstRow) {
  SymMatrix s;
  s.dim_ = firstRow.size();
  s.toeplitz_ = true;
  s.firstRow_ = std::move(firstRow);
  return s;
}

SymMatrix SymMatrix::identity(Index n) {
  Vector row = Vector::Zero(n);
  if (n > 0) row(0) = 1.0;
  return toeplitz(std::move(row));
}

SymMatrix SymMatrix::zero(Index n) { return toeplitz(Vector::Zero(n)); }

const Vector& SymMatrix::firstRow() const {
  if (!toeplitz_) throw Error("SymMatrix: firstRow() on a non-Toeplitz matrix");
  return firstRow_;
}

double SymMatrix::operator()(Index i, Index j) const {
  if (toeplitz_) return firstRow_(std::abs(i - j));
  return full_(i, j);
}

Matrix SymMatrix::dense() const {
  if (!toeplitz_) return full_;
  Matrix m(dim_, dim_);
  for (Index i = 0; i < dim_; ++i) {
    for (Index j = 0; j < dim_; ++j) m(i, j) = firstRow_(std::abs(i - j));
  }
  return m;
}

Vector SymMatrix::apply(const Vector& x, OpCounter* counter) const {
  requireSameSize(dim_, x.size(), "SymMatrix::apply");
  count(counter, static_cast<std::uint64_t>(dim_ * dim_));
  if (!toeplitz_) return full_ * x;
  Vector y(dim_);
  for (Index i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (Index j = 0; j < dim_; ++j) acc += firstRow_(std::abs(i - j)) * x(j);
    y(i) = acc;
  }
  return y;
}

BasisMatrix::BasisMatrix(Matrix columns, Index requestedRank, std::int64_t buildTag)
    : cols_(std::move(columns)), requested_(requestedRank), tag_(buildTag) {
  if (cols_.cols() < 1) throw NumericalError("BasisMatrix: at least one column required");
  if (cols_.cols() > cols_.rows()) throw DimensionError("BasisMatrix: more columns than rows");
  const double err = orthonormalityError(cols_);
  if (!(err <= tol::kOrthonormality)) {
    throw NumericalError("BasisMatrix: columns not orthonormal (max |S^T S - I| = " +
                         std::to_string(err) + ")");
  }
}

Vector BasisMatrix::lift(const Vector& reduced) const {
  requireSameSize(rank(), reduced.size(), "BasisMatrix::lift");
  return cols_ * reduced;
}

Vector BasisMatrix::reduce(const Vector& x) const {
  requireSameSize(ambientDim(), x.size(), "BasisMatrix::reduce");
  return cols_.transpose() * x;
}

double HalfSpace::value(const Vector& x) const {
  requireSameSize(x.size(), normal.size(), "HalfSpace::value");
  requireSameSize(x.size(), anchor.size(), "HalfSpace::value");
  return (x - anchor).dot(normal) + offset;
}

double orthonormalityError(const Matrix& s) {
  const Matrix g = s.transpose() * s;
  return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

double rNorm(const Vector& x, const SymMatrix& r) {
  requireSameSize(x.size(), r.dim(), "rNorm");
  const double q = x.dot(r.apply(x));
  if (q < tol::kNegativeQuadratic) {
    throw NumericalError("rNorm: negative quadratic form, R is not positive semidefinite");
  }
  return std::sqrt(std::max(q, 0.0));
}

BasisMatrix buildKrylovBasis(const SymMatrix& r, const Vector& p, Index rank,
                             double degenerateTol, std::int64_t buildTag, OpCounter* counter) {
  const Index n = r.dim();
  requireSameSize(n, p.size(), "buildKrylovBasis");
  if (rank < 1 || rank > n) {
    throw ConfigError("buildKrylovBasis: requested rank " + std::to_string(rank) +
                      " outside [1, " + std::to_string(n) + "]");
  }
  const auto un = static_cast<std::uint64_t>(n);
  const double pNorm = p.norm();
  count(counter, un);
  if (degenerateTol < 0.0) degenerateTol = tol::kDegenerateNorm;
  if (!(pNorm > degenerateTol)) {
    throw DegenerateError("buildKrylovBasis: degenerate cross-correlation (|p| = " +
                          std::to_string(pNorm) + ")");
  }

  Matrix q(n, rank);
  q.col(0) = p / pNorm;
  count(counter, un);
  Index built = 1;
  double betaPrev = 0.0;
  for (Index j = 0; j + 1 < rank; ++j) {
    Vector w = r.apply(q.col(j), counter);
    const double scale = w.norm();
    const double alpha = q.col(j).dot(w);
    w -= alpha * q.col(j);
    count(counter, 3 * un);
    if (j > 0) {
      w -= betaPrev * q.col(j - 1);
      count(counter, un);
    }
    // Full reorthogonalization, classical Gram-Schmidt applied twice.
    for (int pass = 0; pass < 2; ++pass) {
      const auto basis = q.leftCols(j + 1);
      const Vector c = basis.transpose() * w;
      w -= basis * c;
      count(counter, 4 * static_cast<std::uint64_t>(j + 1) * un);
    }
    const double beta = w.norm();
    count(counter, un);
    if (!(beta > tol::kKrylovBreakdownRel * scale)) break;
    q.col(j + 1) = w / beta;
    count(counter, un);
    betaPrev = beta;
    ++built;
  }
  return BasisMatrix(q.leftCols(built), rank, buildTag);
}

Vector projectHalfSpace(const Vector& x, const HalfSpace& h) {
  const double v = h.value(x);
  if (v <= 0.0) return x;
  const double nn = h.normal.squaredNorm();
  if (nn == 0.0) {
    throw NumericalError("projectHalfSpace: zero normal with positive violation");
  }
  return x - (v / nn) * h.normal;
}

Vector projectSubspace(const Vector& x, const BasisMatrix& s) {
  return s.lift(s.reduce(x));
}

double conditionNumber(const SymMatrix& r) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(r.dense(), Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("conditionNumber: eigensolver failed");
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw NumericalError("conditionNumber: matrix is not positive definite");
  return hi / lo;
}

Matrix orthonormalize(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  return q;
}

}  // namespace rrapsp
