#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rrapsp/complexity.hpp"
#include "rrapsp/error.hpp"
#include "rrapsp/linalg.hpp"
#include "rrapsp/tolerances.hpp"
#include "test_support.hpp"

using namespace rrapsp;
using namespace testsupport;

TEST_CASE("SymMatrix: Toeplitz entries and naive product") {
  Vector row(4);
  row << 3.0, 1.0, -0.5, 0.25;
  const SymMatrix t = SymMatrix::toeplitz(row);
  const Matrix a = t.dense();
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) CHECK(a(i, j) == row(std::abs(i - j)));
  Rng rng(3);
  const Vector x = randomVector(4, rng);
  OpCounter c;
  CHECK((t.apply(x, &c) - naiveMatVec(a, x)).norm() <= 1e-13);
  CHECK(c.mults == 16);
}

TEST_CASE("SymMatrix: fromUpper mirrors the upper triangle") {
  Matrix m(3, 3);
  m << 1, 2, 3, 99, 4, 5, 99, 99, 6;
  const Matrix a = SymMatrix::fromUpper(m).dense();
  CHECK(a(1, 0) == 2);
  CHECK(a(2, 0) == 3);
  CHECK(a(2, 1) == 5);
  CHECK((a - a.transpose()).norm() == 0.0);
}

TEST_CASE("rNorm") {
  Vector x(2);
  x << 1, 0;
  CHECK(rNorm(x, SymMatrix::identity(2)) == doctest::Approx(1.0));
  x << 1, 1;
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 3;
  CHECK(rNorm(x, SymMatrix::fromUpper(d)) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix r = randomSpdNaive(5, rng);
    const Vector v = randomVector(5, rng);
    const double oracle = std::sqrt(naiveDot(v, naiveMatVec(r, v)));
    CHECK(std::abs(rNorm(v, SymMatrix::fromUpper(r)) - oracle) <= 1e-12);
  }

  CHECK_THROWS_AS(rNorm(Vector::Ones(3), SymMatrix::identity(2)), DimensionError);
  Matrix neg = -Matrix::Identity(2, 2);
  CHECK_THROWS_AS(rNorm(x, SymMatrix::fromUpper(neg)), NumericalError);
}

TEST_CASE("Krylov basis: identity collapses to one column") {
  Vector p = Vector::Zero(4);
  p(0) = 1;
  const BasisMatrix s = buildKrylovBasis(SymMatrix::identity(4), p, 3);
  CHECK(s.rank() == 1);
  CHECK(s.requestedRank() == 3);
  CHECK(std::abs(std::abs(s.columns()(0, 0)) - 1.0) <= 1e-14);
}

TEST_CASE("Krylov basis: diag(1,2,3) spans the power sequence") {
  Matrix r = Matrix::Zero(3, 3);
  r.diagonal() << 1, 2, 3;
  const Vector p = Vector::Ones(3);
  const BasisMatrix s = buildKrylovBasis(SymMatrix::fromUpper(r), p, 3);
  REQUIRE(s.rank() == 3);
  const Matrix q = s.columns();
  const Matrix k = krylovMatrix(r, p, 3);
  for (Index j = 0; j < 3; ++j) {
    const Vector v = k.col(j);
    CHECK((v - q * (q.transpose() * v)).norm() <= 1e-9);
  }
}

TEST_CASE("Krylov basis: random SPD agrees with the QR oracle projector") {
  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix r = randomSpdNaive(8, rng);
    const Vector p = randomVector(8, rng);
    OpCounter c;
    const BasisMatrix s = buildKrylovBasis(SymMatrix::fromUpper(r), p, 5, -1.0, 0, &c);
    REQUIRE(s.rank() == 5);
    const Matrix q = s.columns();
    CHECK(maxAbs(q.transpose() * q - Matrix::Identity(5, 5)) <= tol::kOrthonormality);
    const Matrix oracle = gramSchmidt(krylovMatrix(r, p, 5));
    REQUIRE(oracle.cols() == 5);
    CHECK(maxAbs(q * q.transpose() - oracle * oracle.transpose()) <= 1e-8);
    const Matrix k = krylovMatrix(r, p, 5);
    for (Index j = 0; j < 5; ++j) {
      const Vector v = k.col(j);
      CHECK((v - q * (q.transpose() * v)).norm() <= 1e-8 * v.norm());
    }
    CHECK(static_cast<std::int64_t>(c.mults) == krylovBuildMults(8, 5));
  }
}

TEST_CASE("Krylov basis: errors") {
  CHECK_THROWS_AS(buildKrylovBasis(SymMatrix::identity(3), Vector::Zero(3), 2), DegenerateError);
  CHECK_THROWS_AS(buildKrylovBasis(SymMatrix::identity(3), Vector::Ones(3), 4), ConfigError);
  CHECK_THROWS_AS(buildKrylovBasis(SymMatrix::identity(3), Vector::Ones(3), 0), ConfigError);
}

TEST_CASE("BasisMatrix rejects non-orthonormal columns") {
  Matrix m = Matrix::Identity(3, 2);
  m(0, 1) = 1e-6;
  CHECK_THROWS_AS(BasisMatrix(m, 2), NumericalError);
}

TEST_CASE("projectHalfSpace") {
  HalfSpace h;
  h.normal = Vector::Zero(2);
  h.normal(0) = 2;
  h.offset = 4;
  h.anchor = Vector::Zero(2);
  const Vector y = projectHalfSpace(Vector::Zero(2), h);
  CHECK(y(0) == doctest::Approx(-2.0));
  CHECK(y(1) == doctest::Approx(0.0));

  HalfSpace inside = h;
  inside.offset = -1;
  const Vector x = Vector::Ones(2) * 0.1;
  CHECK((projectHalfSpace(x, inside) - x).norm() == 0.0);

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    HalfSpace g;
    g.normal = randomVector(6, rng);
    g.anchor = randomVector(6, rng);
    g.offset = rng.normal();
    const Vector z = randomVector(6, rng);
    // Oracle: projection onto {y : aᵀy <= b} with a = normal, b = aᵀanchor − offset.
    const double b = naiveDot(g.normal, g.anchor) - g.offset;
    const double viol = naiveDot(g.normal, z) - b;
    const Vector oracle = viol <= 0 ? z : Vector(z - viol / naiveDot(g.normal, g.normal) * g.normal);
    const Vector got = projectHalfSpace(z, g);
    CHECK((got - oracle).norm() <= 1e-12);
    if (viol > 0) {
      CHECK(std::abs(g.value(got)) <= 1e-10);
      const Vector disp = z - got;
      CHECK(std::abs(std::abs(naiveDot(disp, g.normal)) - disp.norm() * g.normal.norm()) <= 1e-10);
    }
  }

  HalfSpace zero;
  zero.normal = Vector::Zero(2);
  zero.offset = 1;
  zero.anchor = Vector::Zero(2);
  CHECK_THROWS_AS(projectHalfSpace(Vector::Zero(2), zero), NumericalError);
}

TEST_CASE("projectSubspace") {
  const BasisMatrix e1(Matrix::Identity(3, 1), 1);
  Vector x(3);
  x << 1, 2, 3;
  const Vector y = projectSubspace(x, e1);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 0.0);
  CHECK(y(2) == 0.0);

  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix a(7, 3);
    for (Index i = 0; i < 7; ++i)
      for (Index j = 0; j < 3; ++j) a(i, j) = rng.normal();
    const BasisMatrix s(gramSchmidt(a), 3);
    const Vector v = randomVector(7, rng);
    const Vector pv = projectSubspace(v, s);
    CHECK((s.columns().transpose() * (v - pv)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(pv.norm() <= v.norm() + 1e-12);
    CHECK((projectSubspace(pv, s) - pv).norm() <= 1e-10);
    CHECK(std::abs(v.squaredNorm() - pv.squaredNorm() - (v - pv).squaredNorm()) <= 1e-9 * v.squaredNorm());
    const Vector inRange = s.lift(randomVector(3, rng));
    CHECK((projectSubspace(inRange, s) - inRange).norm() <= 1e-10);
  }
}

TEST_CASE("conditionNumber") {
  CHECK(conditionNumber(SymMatrix::identity(4)) == doctest::Approx(1.0));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 1, 4;
  CHECK(conditionNumber(SymMatrix::fromUpper(d)) == doctest::Approx(4.0));

  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix r = randomSpdNaive(6, rng);
    const std::vector<double> ev = jacobiEigenvalues(r);
    const double lo = *std::min_element(ev.begin(), ev.end());
    const double hi = *std::max_element(ev.begin(), ev.end());
    CHECK(std::abs(conditionNumber(SymMatrix::fromUpper(r)) - hi / lo) <= 1e-8 * (hi / lo));
  }

  Matrix singular = Matrix::Zero(2, 2);
  singular(0, 0) = 1;
  CHECK_THROWS_AS(conditionNumber(SymMatrix::fromUpper(singular)), NumericalError);
}
