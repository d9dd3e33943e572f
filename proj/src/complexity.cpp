#include "rrapsp/complexity.hpp"

#include "rrapsp/error.hpp"

namespace rrapsp {

std::string algorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::Nlms: return "nlms";
    case Algorithm::Rls: return "rls";
    case Algorithm::Cgrrf: return "cgrrf";
    case Algorithm::KrrApspSingle: return "krr-apsp";
    case Algorithm::KrrApspParallel: return "krr-apsp-parallel";
  }
  return "unknown";
}

Fraction alphaFactor(std::int64_t q, std::int64_t r, std::int64_t m) {
  if (m < 1) throw ConfigError("alphaFactor: m must be >= 1");
  return {q + r + m - 2, m};
}

Fraction betaFactor(std::int64_t r, std::int64_t m) {
  if (m < 1) throw ConfigError("betaFactor: m must be >= 1");
  return {r + m - 1, m};
}

namespace {

// Everything is kept over the common denominator m.
std::int64_t cgrrfNumerator(const ComplexityParams& p) {
  const std::int64_t n = p.n;
  const std::int64_t d = p.rank;
  return (d - 1) * n * n + (5 * d - 4) * n + p.m * (4 * n + 2 * (d - 1));
}

}  // namespace

Fraction krrUpdateShare(const ComplexityParams& p) {
  const std::int64_t num = (p.q + p.r + p.m - 2) * p.rank * p.n +
                           p.m * ((4 * p.q + 2 * p.r) * p.rank + (p.r + 7) * p.q + 2);
  return {num, p.m};
}

Fraction krrParallelUpdateShare(const ComplexityParams& p) {
  const std::int64_t num =
      (p.r + p.m - 1) * p.rank * p.n + p.m * ((2 * p.r + 4) * p.rank + p.r + 9);
  return {num, p.m};
}

Fraction complexityCount(Algorithm algorithm, const ComplexityParams& p) {
  if (p.m < 1) throw ConfigError("complexityCount: m must be >= 1");
  switch (algorithm) {
    case Algorithm::Nlms: return {3 * p.n + 2};
    case Algorithm::Rls: return {4 * p.n * p.n + 4 * p.n + 1};
    case Algorithm::Cgrrf: return {cgrrfNumerator(p), p.m};
    case Algorithm::KrrApspSingle: {
      const Fraction u = krrUpdateShare(p);
      return {cgrrfNumerator(p) + u.num * (p.m / u.den), p.m};
    }
    case Algorithm::KrrApspParallel: {
      const Fraction u = krrParallelUpdateShare(p);
      return {cgrrfNumerator(p) + u.num * (p.m / u.den), p.m};
    }
  }
  throw ConfigError("complexityCount: unknown algorithm");
}

std::int64_t krylovBuildMults(std::int64_t n, std::int64_t rank) {
  std::int64_t total = 2 * n;  // ‖p‖ and the first normalization
  for (std::int64_t j = 0; j + 1 < rank; ++j) {
    total += n * n;                  // R q_j
    total += 3 * n;                  // ‖R q_j‖, α, α q_j
    if (j > 0) total += n;           // β q_{j-1}
    total += 2 * 4 * (j + 1) * n;    // two Gram-Schmidt passes
    total += 2 * n;                  // ‖w‖ and normalization
  }
  return total;
}

std::int64_t cgSolveMults(std::int64_t n, std::int64_t iterations, bool zeroStart) {
  std::int64_t total = zeroStart ? n : n * n + n;
  total += iterations * (n * n + n + 4 * n + 2);
  return total;
}

}  // namespace rrapsp
