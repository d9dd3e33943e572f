#include <doctest.h>

#include <cmath>
#include <vector>

#include "rrapsp/error.hpp"
#include "rrapsp/estimation.hpp"
#include "test_support.hpp"

using namespace rrapsp;
using namespace testsupport;

TEST_CASE("initEstimates") {
  const StatEstimates t = initEstimates(EstimateMode::Toeplitz, 4, 0.999);
  CHECK(t.snapshotR().dense().isZero(0.0));
  CHECK(t.snapshotR().isToeplitz());
  CHECK(t.snapshotP().size() == 4);
  CHECK(t.snapshotP().isZero(0.0));
  CHECK(t.sampleCount() == 0);

  const StatEstimates f = initEstimates(EstimateMode::FullSymmetric, 2, 0.5);
  CHECK(f.snapshotR().dim() == 2);
  CHECK(f.snapshotR().dense().isZero(0.0));

  CHECK_THROWS_AS(initEstimates(EstimateMode::Toeplitz, 4, 1.0), ConfigError);
  CHECK_THROWS_AS(initEstimates(EstimateMode::Toeplitz, 4, 0.0), ConfigError);
  CHECK_THROWS_AS(initEstimates(EstimateMode::Toeplitz, 0, 0.9), ConfigError);
}

TEST_CASE("single updates") {
  Vector u(3);
  u << 1, 0, 0;
  const StatEstimates t = updateEstimates(initEstimates(EstimateMode::Toeplitz, 3, 0.9), u, 2.0);
  CHECK(t.snapshotR().firstRow()(0) == 1.0);
  CHECK(t.snapshotR().firstRow()(1) == 0.0);
  CHECK(t.snapshotP()(0) == 2.0);
  CHECK(t.sampleCount() == 1);

  const StatEstimates f = updateEstimates(initEstimates(EstimateMode::FullSymmetric, 2, 0.9), Vector::Ones(2), 0.0);
  CHECK(f.snapshotR().dense().isApprox(Matrix::Ones(2, 2)));
  CHECK(f.snapshotP().isZero(0.0));

  StatEstimates bad = initEstimates(EstimateMode::Toeplitz, 3, 0.9);
  CHECK_THROWS_AS(bad.update(Vector::Ones(2), 1.0), DimensionError);
}

TEST_CASE("Toeplitz snapshot expands the first row") {
  // r̂ = (2, 1, 0) reached by two updates: u = (1, 1, 0) then u = (1, 0, 0) scaled.
  StatEstimates t = initEstimates(EstimateMode::Toeplitz, 3, 0.5);
  Vector u(3);
  u << 1, 1, 0;
  t.update(u, 0.0);  // r̂ = (1, 1, 0)
  u << std::sqrt(1.5), 0, 0;
  t.update(u, 0.0);  // r̂ = (0.5 + 1.5, 0.5, 0)
  Matrix expect(3, 3);
  expect << 2, 0.5, 0, 0.5, 2, 0.5, 0, 0.5, 2;
  CHECK(maxAbs(t.snapshotR().dense() - expect) <= 1e-15);
}

TEST_CASE("geometric-sum oracle for a fixed sample") {
  Vector u(3);
  u << 0.5, -1.0, 2.0;
  const double d = 0.7;
  const double g = 0.9;
  StatEstimates f = initEstimates(EstimateMode::FullSymmetric, 3, g);
  StatEstimates t = initEstimates(EstimateMode::Toeplitz, 3, g);
  for (int k = 0; k < 100; ++k) {
    f.update(u, d);
    t.update(u, d);
  }
  const double sum = (1.0 - std::pow(g, 100)) / (1.0 - g);
  CHECK(maxAbs(f.snapshotR().dense() - sum * u * u.transpose()) <= 1e-10);
  CHECK((f.snapshotP() - sum * d * u).norm() <= 1e-10);
  CHECK((t.snapshotR().firstRow() - sum * u(0) * u).norm() <= 1e-10);
}

TEST_CASE("batch recomputation oracle on a random stream") {
  Rng rng(17);
  const Index n = 5;
  const double g = 0.97;
  const int steps = 300;
  std::vector<Vector> us;
  std::vector<double> ds;
  StatEstimates f = initEstimates(EstimateMode::FullSymmetric, n, g);
  StatEstimates t = initEstimates(EstimateMode::Toeplitz, n, g);
  for (int k = 0; k < steps; ++k) {
    us.push_back(randomVector(n, rng));
    ds.push_back(rng.normal());
    f.update(us.back(), ds.back());
    t.update(us.back(), ds.back());
  }
  Matrix r = Matrix::Zero(n, n);
  Vector row = Vector::Zero(n);
  Vector p = Vector::Zero(n);
  for (int j = 0; j < steps; ++j) {
    const double w = std::pow(g, steps - 1 - j);
    const Vector& u = us[static_cast<std::size_t>(j)];
    for (Index a = 0; a < n; ++a) {
      for (Index b = 0; b < n; ++b) r(a, b) += w * u(a) * u(b);
      row(a) += w * u(0) * u(a);
      p(a) += w * ds[static_cast<std::size_t>(j)] * u(a);
    }
  }
  const Matrix fr = f.snapshotR().dense();
  CHECK(maxAbs(fr - r) <= 1e-9 * maxAbs(r));
  CHECK((f.snapshotP() - p).norm() <= 1e-9 * p.norm());
  CHECK((t.snapshotR().firstRow() - row).norm() <= 1e-9 * row.norm());
  CHECK((fr - fr.transpose()).norm() == 0.0);
  const Matrix tr = t.snapshotR().dense();
  const Vector first = t.snapshotR().firstRow();
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) CHECK(tr(a, b) == first(std::abs(a - b)));
}

TEST_CASE("scaling the inputs scales the estimates") {
  Rng rng(23);
  StatEstimates a = initEstimates(EstimateMode::FullSymmetric, 4, 0.95);
  StatEstimates b = initEstimates(EstimateMode::FullSymmetric, 4, 0.95);
  for (int k = 0; k < 50; ++k) {
    const Vector u = randomVector(4, rng);
    const double d = rng.normal();
    a.update(u, d);
    b.update(2.0 * u, d);
  }
  CHECK(maxAbs(b.snapshotR().dense() - 4.0 * a.snapshotR().dense()) <= 1e-12);
  CHECK((b.snapshotP() - 2.0 * a.snapshotP()).norm() <= 1e-12);
}

TEST_CASE("counter and maturity") {
  StatEstimates t = initEstimates(EstimateMode::Toeplitz, 6, 0.9);
  OpCounter c;
  t.update(Vector::Ones(6), 1.0, &c);
  CHECK(c.mults == 4 * 6);
  CHECK_FALSE(t.mature());
  for (int k = 0; k < 5; ++k) t.update(Vector::Ones(6), 1.0);
  CHECK(t.mature());
}
