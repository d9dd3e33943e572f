#include <doctest.h>

#include <cmath>
#include <vector>

#include "rrapsp/complexity.hpp"
#include "rrapsp/error.hpp"
#include "rrapsp/filters.hpp"
#include "rrapsp/scenarios.hpp"
#include "test_support.hpp"

using namespace rrapsp;
using namespace testsupport;

namespace {

// Straight evaluation of the weighted parallel subgradient projection with
// the extrapolation M: each half-space projection of g_ι(h) = ‖Uᵀh − d‖² − ρ
// computed from its definition.
Vector parallelProjectionOracle(const Vector& h, const std::vector<Matrix>& us, const std::vector<Vector>& ds,
                                double rho, double lambda, const std::vector<double>& w) {
  Vector sumDir = Vector::Zero(h.size());
  double sumSq = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < us.size(); ++i) {
    Vector e(us[i].cols());
    for (Index c = 0; c < us[i].cols(); ++c) e(c) = naiveDot(us[i].col(c), h) - ds[i](c);
    const double g = naiveDot(e, e) - rho;
    if (g <= 0.0) continue;
    const Vector grad = 2.0 * naiveMatVec(us[i], e);
    const double gg = naiveDot(grad, grad);
    if (gg == 0.0) continue;
    const Vector proj = h - (g / gg) * grad;
    sumDir += w[i] * (proj - h);
    sumSq += w[i] * (proj - h).squaredNorm();
    any = true;
  }
  if (!any || sumDir.squaredNorm() == 0.0) return h;
  const double m = sumSq / sumDir.squaredNorm();
  return h + lambda * m * sumDir;
}

KrrParams smallParams() {
  KrrParams p;
  p.rank = 4;
  p.q = 3;
  p.r = 1;
  p.rho = 0.05;
  p.lambda = 0.5;
  p.refreshPeriod = 10;
  return p;
}

SysIdConfig smallStream(std::uint64_t seed, Index n = 12) {
  SysIdConfig c;
  c.n = n;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("q=1, r=1, rho=0 is NLMS in the reduced space") {
  SysIdStream stream(smallStream(4, 10));
  KrrParams p;
  p.rank = 4;
  p.q = 1;
  p.r = 1;
  p.rho = 0.0;
  p.lambda = 0.8;
  p.refreshPeriod = 1000000;
  KrrApsp f(p, 10);
  double worst = 0.0;
  int compared = 0;
  for (int k = 0; k < 500; ++k) {
    const StreamSample s = stream.next();
    if (!f.active()) {
      f.step(s.u, s.d);
      continue;
    }
    const Vector ht = f.hTilde();
    const Vector ut = f.basis()->columns().transpose() * s.u;
    const double err = s.d - naiveDot(ht, ut);
    const Vector expected = ht + (p.lambda / 2.0) * (err / naiveDot(ut, ut)) * ut;
    f.step(s.u, s.d);
    worst = std::max(worst, (f.hTilde() - expected).norm());
    ++compared;
  }
  CHECK(compared > 400);
  CHECK(worst <= 1e-12);
}

TEST_CASE("apspUpdate matches the direct parallel projection oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.below(4));
    const int q = 1 + static_cast<int>(rng.below(3));
    const int r = 1 + static_cast<int>(rng.below(2));
    const double rho = 0.3 * rng.uniform();
    const double lambda = 0.1 + 1.8 * rng.uniform();
    std::vector<double> w(static_cast<std::size_t>(q));
    double sum = 0.0;
    for (double& x : w) sum += (x = 0.2 + rng.uniform());
    for (double& x : w) x /= sum;
    std::vector<Vector> reduced;
    std::vector<double> targets;
    for (int c = 0; c < q + r - 1; ++c) {
      reduced.push_back(randomVector(d, rng));
      targets.push_back(rng.normal());
    }
    const Vector h = randomVector(d, rng);
    const ApspSettings st{q, r, rho, lambda, std::span<const double>(w)};
    const ApspResult res = apspUpdate(h, reduced, targets, st);

    std::vector<Matrix> us;
    std::vector<Vector> ds;
    for (int i = 0; i < q; ++i) {
      Matrix u(d, r);
      Vector dv(r);
      for (int c = 0; c < r; ++c) {
        u.col(c) = reduced[static_cast<std::size_t>(i + c)];
        dv(c) = targets[static_cast<std::size_t>(i + c)];
      }
      us.push_back(u);
      ds.push_back(dv);
    }
    const Vector oracle = parallelProjectionOracle(h, us, ds, rho, lambda, w);
    CHECK((res.hNext - oracle).norm() <= 1e-11 * std::max(1.0, oracle.norm()));
    if (res.moved) CHECK(res.relaxation >= 1.0 - 1e-12);
    if (q == 1 && res.moved) CHECK(res.relaxation == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("no violation leaves the reduced filter untouched") {
  Vector u(2);
  u << 1.0, 0.5;
  const std::vector<Vector> reduced{u};
  const std::vector<double> targets{0.2};
  Vector h(2);
  h << 0.1, 0.2;  // uᵀh = 0.2, error 0
  const ApspResult res = apspUpdate(h, reduced, targets, ApspSettings{1, 1, 0.01, 1.0, {}});
  CHECK_FALSE(res.violated);
  CHECK_FALSE(res.moved);
  CHECK((res.hNext.array() == h.array()).all());
}

TEST_CASE("KRR-APSP keeps h in the range of the current basis") {
  SysIdStream stream(smallStream(9));
  KrrApsp f(smallParams(), 12);
  for (int k = 0; k < 300; ++k) {
    const StreamSample s = stream.next();
    const StepOutput out = f.step(s.u, s.d);
    if (!f.active()) continue;
    const Matrix& q = f.basis()->columns();
    CHECK((out.hFull - q * (q.transpose() * out.hFull)).norm() <= 1e-10 * std::max(1.0, out.hFull.norm()));
    CHECK(orthonormalityError(q) <= 1e-10);
    CHECK(f.hTilde().size() == f.basis()->rank());
    if (out.updated) CHECK(out.relaxation >= 1.0 - 1e-12);
  }
}

TEST_CASE("rebase carries reduced coordinates, so h moves through Phi") {
  SysIdStream stream(smallStream(10));
  KrrApsp f(smallParams(), 12);
  while (!f.active()) {
    const StreamSample s = stream.next();
    f.step(s.u, s.d);
  }
  for (int k = 0; k < 40; ++k) {
    const StreamSample s = stream.next();
    f.step(s.u, s.d);
  }
  const BasisMatrix before = *f.basis();
  const Vector h = f.fullCoefficients();
  Rng rng(3);
  Matrix raw(12, 4);
  for (Index j = 0; j < 4; ++j) raw.col(j) = randomVector(12, rng);
  const Matrix next = gramSchmidt(raw);
  const BasisMatrix nb(next, 4);
  const Vector ht = f.hTilde();
  f.rebase(nb);
  CHECK((f.hTilde() - ht).norm() == 0.0);
  const Vector phiH = next * (before.columns().transpose() * h);
  CHECK((f.fullCoefficients() - phiH).norm() <= 1e-12);
}

TEST_CASE("KRR-APSP rejects invalid parameters") {
  KrrParams p = smallParams();
  p.rank = 13;
  CHECK_THROWS_AS(KrrApsp(p, 12), ConfigError);
  p = smallParams();
  p.lambda = 2.5;
  CHECK_THROWS_AS(KrrApsp(p, 12), ConfigError);
  p = smallParams();
  p.weights = {0.5, 0.5};
  CHECK_THROWS_AS(KrrApsp(p, 12), ConfigError);
  p.weights = {0.5, 0.3, 0.3};
  CHECK_THROWS_AS(KrrApsp(p, 12), ConfigError);
  p = smallParams();
  CHECK_THROWS_AS(KrrApsp(p, 12, InitMode::Vector), ConfigError);
}

TEST_CASE("conjugate gradient is the R-norm best approximation in the Krylov space") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 8;
    const Matrix r = randomSpdNaive(n, rng);
    const Vector p = randomVector(n, rng);
    for (Index d = 1; d <= 5; ++d) {
      const CgResult cg = conjugateGradient(SymMatrix::fromUpper(r), p, Vector::Zero(n), static_cast<int>(d));
      const Matrix q = gramSchmidt(krylovMatrix(r, p, d));
      const Matrix rq = r * q;
      const Vector coef = (q.transpose() * rq).ldlt().solve(q.transpose() * p);
      const Vector oracle = q * coef;
      CHECK((cg.x - oracle).norm() <= 1e-9 * std::max(1.0, oracle.norm()));
    }
  }
}

TEST_CASE("CGRRF holds its coefficients between solves") {
  SysIdStream stream(smallStream(12));
  CgrrfParams p;
  p.rank = 3;
  p.refreshPeriod = 10;
  Cgrrf f(p, 12);
  Vector last = f.fullCoefficients();
  int changes = 0;
  for (int k = 0; k < 200; ++k) {
    const StreamSample s = stream.next();
    f.step(s.u, s.d);
    if ((f.fullCoefficients() - last).norm() > 0.0) ++changes;
    last = f.fullCoefficients();
  }
  // First solve at k = 11, then every 10 steps.
  CHECK(changes >= 18);
  CHECK(changes <= 20);
}

TEST_CASE("NLMS closed form and counter") {
  Nlms f(3, 0.5);
  Vector u(3);
  u << 1, 2, 2;
  const StepOutput out = f.step(u, 9.0);
  CHECK(out.y == 0.0);
  CHECK((f.fullCoefficients() - 0.5 * 9.0 / 9.0 * u).norm() <= 1e-15);
  CHECK(out.mults == 3 * 3 + 2);
}

TEST_CASE("RLS matches regularized weighted least squares") {
  Rng rng(51);
  const Index n = 4;
  const double lam = 0.98;
  const double delta = 0.01;
  Rls f(n, lam, delta);
  Matrix a = Matrix::Zero(n, n);
  Vector b = Vector::Zero(n);
  for (int k = 0; k < 60; ++k) {
    const Vector u = randomVector(n, rng);
    const double d = rng.normal();
    f.step(u, d);
    a = lam * a + u * u.transpose();
    b = lam * b + d * u;
  }
  const Matrix reg = a + std::pow(lam, 60) * delta * Matrix::Identity(n, n);
  const Vector oracle = reg.ldlt().solve(b);
  CHECK((f.fullCoefficients() - oracle).norm() <= 1e-8 * oracle.norm());
}

TEST_CASE("forced-update counters match the closed forms for r = 1") {
  const Index n = 50;
  SysIdConfig cfg;
  cfg.n = n;
  cfg.seed = 2;
  SysIdStream stream(cfg);
  KrrParams p;
  p.rank = 5;
  p.q = 5;
  p.r = 1;
  p.rho = 0.0;
  p.lambda = 0.5;
  p.refreshPeriod = 10;
  KrrApsp f(p, n);
  while (!f.active()) {
    const StreamSample s = stream.next();
    f.step(s.u, s.d);
  }
  for (int k = 0; k < 20; ++k) {
    const StreamSample s = stream.next();
    f.step(s.u, s.d);
  }
  std::uint64_t estUpd = 0;
  const int window = 100;
  for (int k = 0; k < window; ++k) {
    const StreamSample s = stream.next();
    const StepOutput out = f.step(s.u, s.d);
    REQUIRE(out.updated);
    estUpd += out.breakdown.estimation + out.breakdown.update;
    if (out.breakdown.basis > 0) CHECK(static_cast<std::int64_t>(out.breakdown.basis) == krylovBuildMults(n, 5));
  }
  const ComplexityParams cp{n, 5, 5, 1, 10};
  const Fraction closed = krrUpdateShare(cp);
  CHECK(static_cast<double>(estUpd) / window == doctest::Approx(4.0 * n + closed.value()).epsilon(1e-12));
}
