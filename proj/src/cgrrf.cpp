#include <string>
#include <utility>

#include <fmt/format.h>

#include "rrapsp/error.hpp"
#include "rrapsp/filters.hpp"
#include "rrapsp/tolerances.hpp"

namespace rrapsp {

CgResult conjugateGradient(const SymMatrix& a, const Vector& p, const Vector& x0, int iterations,
                           OpCounter* counter) {
  const Index n = a.dim();
  if (p.size() != n || x0.size() != n) throw DimensionError("conjugateGradient: size mismatch");
  const auto un = static_cast<std::uint64_t>(n);
  CgResult res;
  res.x = x0;
  Vector r = p;
  if (!x0.isZero(0.0)) r -= a.apply(x0, counter);
  Vector dir = r;
  double rr = r.squaredNorm();
  count(counter, un);
  for (int it = 0; it < iterations; ++it) {
    if (rr == 0.0) break;
    const Vector ad = a.apply(dir, counter);
    const double curvature = dir.dot(ad);
    count(counter, un);
    if (!(curvature > 0.0)) {
      res.breakdown = true;
      break;
    }
    const double alpha = rr / curvature;
    res.x += alpha * dir;
    r -= alpha * ad;
    const double rrNext = r.squaredNorm();
    const double beta = rrNext / rr;
    dir = r + beta * dir;
    rr = rrNext;
    count(counter, 4 * un + 2);
    ++res.iterations;
  }
  return res;
}

void CgrrfParams::validate(Index n) const {
  if (n < 1) throw ConfigError("CGRRF: filter length must be positive");
  if (rank < 1 || rank > n) {
    throw ConfigError(fmt::format("CGRRF: rank D = {} must lie in [1, N = {}]", rank, n));
  }
  if (refreshPeriod < 1) throw ConfigError("CGRRF: refresh period m must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("CGRRF: gamma must lie in (0, 1)");
  if (!(warmupFactor >= 0.0)) throw ConfigError("CGRRF: warmup factor must be >= 0");
}

Cgrrf::Cgrrf(CgrrfParams params, Index n, std::optional<Vector> initial)
    : params_(std::move(params)), n_(n), est_((params_.validate(n), params_.mode), n, params_.gamma) {
  initial_ = initial ? std::move(*initial) : Vector::Zero(n);
  if (initial_.size() != n) throw ConfigError("CGRRF: initial vector has the wrong length");
  h_ = initial_;
}

std::string Cgrrf::name() const {
  return fmt::format("cgrrf(D={},m={})", params_.rank, params_.refreshPeriod);
}

StepOutput Cgrrf::step(const Vector& u, double d) {
  if (u.size() != n_) throw DimensionError("CGRRF: regressor length mismatch");
  StepOutput out;
  out.y = h_.dot(u);
  out.breakdown.update = static_cast<std::uint64_t>(n_);

  OpCounter estCounter;
  est_.update(u, d, &estCounter);
  out.breakdown.estimation = estCounter.mults;

  const bool due = solved_ ? (k_ % params_.refreshPeriod == 1 % params_.refreshPeriod)
                           : (est_.mature(params_.warmupFactor) &&
                              est_.snapshotP().norm() > tol::kDegenerateNorm);
  if (due) {
    OpCounter cgCounter;
    CgResult cg = conjugateGradient(est_.snapshotR(), est_.snapshotP(), initial_,
                                    static_cast<int>(params_.rank), &cgCounter);
    if (cg.breakdown) ++breakdowns_;
    h_ = std::move(cg.x);
    solved_ = true;
    out.breakdown.basis = cgCounter.mults;
  }
  out.hFull = h_;
  out.mults = out.breakdown.total();
  ++k_;
  return out;
}

}  // namespace rrapsp
