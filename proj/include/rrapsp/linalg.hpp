#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

namespace rrapsp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Multiplication tally threaded through instrumented code paths.
struct OpCounter {
  std::uint64_t mults = 0;
  void add(std::uint64_t n) { mults += n; }
};

inline void count(OpCounter* c, std::uint64_t n) {
  if (c != nullptr) c->add(n);
}

/// Real symmetric matrix, optionally with Toeplitz structure.
///
/// Toeplitz matrices keep only their first row; entry (i, j) is
/// firstRow[|i - j|]. General matrices are built from an upper triangle and
/// mirrored, so symmetry holds bitwise.
class SymMatrix {
 public:
  SymMatrix() = default;

  static SymMatrix fromUpper(const Matrix& m);
  static SymMatrix toeplitz(Vector firstRow);
  static SymMatrix identity(Index n);
  static SymMatrix zero(Index n);

  Index dim() const { return dim_; }
  bool isToeplitz() const { return toeplitz_; }
  const Vector& firstRow() const;

  double operator()(Index i, Index j) const;
  Matrix dense() const;

  /// y = A x with the naive O(N²) kernel.
  Vector apply(const Vector& x, OpCounter* counter = nullptr) const;

 private:
  Index dim_ = 0;
  bool toeplitz_ = false;
  Vector firstRow_;
  Matrix full_;
};

/// N×D_eff matrix with orthonormal columns.
class BasisMatrix {
 public:
  BasisMatrix() = default;
  /// Throws NumericalError when columns are not orthonormal to
  /// tol::kOrthonormality.
  BasisMatrix(Matrix columns, Index requestedRank, std::int64_t buildTag = 0);

  const Matrix& columns() const { return cols_; }
  Index ambientDim() const { return cols_.rows(); }
  Index rank() const { return cols_.cols(); }
  Index requestedRank() const { return requested_; }
  std::int64_t buildTag() const { return tag_; }
  bool empty() const { return cols_.cols() == 0; }

  /// S x̃
  Vector lift(const Vector& reduced) const;
  /// Sᵀ x
  Vector reduce(const Vector& x) const;

 private:
  Matrix cols_;
  Index requested_ = 0;
  std::int64_t tag_ = 0;
};

/// {x : ⟨x − anchor, normal⟩ + offset ≤ 0}
struct HalfSpace {
  Vector normal;
  double offset = 0.0;
  Vector anchor;

  /// ⟨x − anchor, normal⟩ + offset
  double value(const Vector& x) const;
  bool contains(const Vector& x, double slack = 0.0) const { return value(x) <= slack; }
};

/// max |SᵀS − I|
double orthonormalityError(const Matrix& s);

/// sqrt(xᵀ R x)
double rNorm(const Vector& x, const SymMatrix& r);

/// Orthonormal basis of K_D(R, p) = span{p, Rp, ..., R^{D-1}p}.
///
/// Lanczos three-term recurrence followed by two classical Gram-Schmidt
/// passes against every earlier vector. The basis is truncated (rank() < D)
/// when a new direction vanishes relative to ‖R q_j‖. Throws DegenerateError
/// when ‖p‖ <= degenerateTol.
BasisMatrix buildKrylovBasis(const SymMatrix& r, const Vector& p, Index rank,
                             double degenerateTol = -1.0, std::int64_t buildTag = 0,
                             OpCounter* counter = nullptr);

/// Relaxation-free projection onto a half-space.
Vector projectHalfSpace(const Vector& x, const HalfSpace& h);

/// S Sᵀ x
Vector projectSubspace(const Vector& x, const BasisMatrix& s);

/// λ_max / λ_min of a symmetric positive definite matrix.
double conditionNumber(const SymMatrix& r);

/// Orthonormalize the columns of an arbitrary full-column-rank matrix (QR).
Matrix orthonormalize(const Matrix& a);

}  // namespace rrapsp
