#pragma once

#include <cstdint>
#include <numeric>
#include <string>

namespace rrapsp {

/// Exact non-negative rational, reduced.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Fraction() = default;
  Fraction(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    const std::int64_t g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Fraction& a, const Fraction& b) { return a.num == b.num && a.den == b.den; }
};

enum class Algorithm { Nlms, Rls, Cgrrf, KrrApspSingle, KrrApspParallel };

std::string algorithmName(Algorithm a);

struct ComplexityParams {
  std::int64_t n = 50;
  std::int64_t rank = 5;  // D
  std::int64_t q = 1;
  std::int64_t r = 1;
  std::int64_t m = 10;
};

/// α(q, r, m) = (q + r + m − 2) / m
Fraction alphaFactor(std::int64_t q, std::int64_t r, std::int64_t m);
/// β(r, m) = (r + m − 1) / m
Fraction betaFactor(std::int64_t r, std::int64_t m);

/// Average multiplications per iteration, closed forms of the complexity table:
///   NLMS                 3N + 2
///   RLS                  4N² + 4N + 1
///   CGRRF                (D−1)N²/m + [(5D−4)/m + 4]N + 2(D−1)
///   KRR-APSP (1 proc.)   CGRRF + α(q,r,m)DN + (4q+2r)D + (r+7)q + 2
///   KRR-APSP (q proc.)   CGRRF + β(r,m)DN + (2r+4)D + r + 9
Fraction complexityCount(Algorithm algorithm, const ComplexityParams& p);

/// Filter-update share of KRR-APSP on one processor: αDN + (4q+2r)D + (r+7)q + 2.
Fraction krrUpdateShare(const ComplexityParams& p);
/// Per-processor filter-update share with q processors: βDN + (2r+4)D + r + 9.
Fraction krrParallelUpdateShare(const ComplexityParams& p);

/// Multiplications of one rank-D Krylov basis build as instrumented in
/// buildKrylovBasis (Lanczos with two Gram-Schmidt passes), full rank reached.
std::int64_t krylovBuildMults(std::int64_t n, std::int64_t rank);
/// Multiplications of `iterations` CG steps from a zero start as instrumented.
std::int64_t cgSolveMults(std::int64_t n, std::int64_t iterations, bool zeroStart = true);

}  // namespace rrapsp
