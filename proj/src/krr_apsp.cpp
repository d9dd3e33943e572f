#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include <fmt/format.h>

#include "rrapsp/error.hpp"
#include "rrapsp/filters.hpp"
#include "rrapsp/tolerances.hpp"

namespace rrapsp {

void KrrParams::validate(Index n) const {
  if (n < 1) throw ConfigError("KRR-APSP: filter length must be positive");
  if (rank < 1 || rank > n) {
    throw ConfigError(fmt::format("KRR-APSP: rank D = {} must lie in [1, N = {}]", rank, n));
  }
  if (q < 1) throw ConfigError("KRR-APSP: q must be >= 1");
  if (r < 1) throw ConfigError("KRR-APSP: r must be >= 1");
  if (!(rho >= 0.0)) throw ConfigError("KRR-APSP: rho must be >= 0");
  if (refreshPeriod < 1) throw ConfigError("KRR-APSP: refresh period m must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 2.0)) throw ConfigError("KRR-APSP: lambda must lie in [0, 2]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("KRR-APSP: gamma must lie in (0, 1)");
  if (!(warmupFactor >= 0.0)) throw ConfigError("KRR-APSP: warmup factor must be >= 0");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != q) {
      throw ConfigError("KRR-APSP: need exactly q weights");
    }
    double sum = 0.0;
    for (double w : weights) {
      if (!(w > 0.0 && w <= 1.0)) throw ConfigError("KRR-APSP: weights must lie in (0, 1]");
      sum += w;
    }
    if (std::abs(sum - 1.0) > tol::kWeightSum) throw ConfigError("KRR-APSP: weights must sum to 1");
  }
}

ApspResult apspUpdate(const Vector& hTilde, std::span<const Vector> reduced,
                      std::span<const double> targets, const ApspSettings& s) {
  ApspResult out;
  out.hNext = hTilde;
  const int available = static_cast<int>(std::min(reduced.size(), targets.size()));
  if (available == 0) return out;
  const int r = std::min(s.r, available);
  const int q = std::min(s.q, available - r + 1);
  const int columns = q + r - 1;
  const Index dim = hTilde.size();
  const auto ud = static_cast<std::uint64_t>(dim);

  // Weights of the active index set; custom weights are renormalized when
  // start-up clamping drops the oldest indices.
  std::vector<double> w(static_cast<std::size_t>(q), 1.0 / q);
  if (!s.weights.empty()) {
    double sum = 0.0;
    for (int t = 0; t < q; ++t) sum += s.weights[static_cast<std::size_t>(t)];
    for (int t = 0; t < q; ++t) w[static_cast<std::size_t>(t)] = s.weights[static_cast<std::size_t>(t)] / sum;
  }

  // h̃ᵀũ_j for the q + r − 1 distinct reduced regressors; z[0] is the output.
  std::vector<double> z(static_cast<std::size_t>(columns));
  for (int j = 0; j < columns; ++j) z[static_cast<std::size_t>(j)] = hTilde.dot(reduced[static_cast<std::size_t>(j)]);
  out.mults += static_cast<std::uint64_t>(columns) * ud;

  Vector f = Vector::Zero(dim);
  double ellSum = 0.0;
  double deltaEnergy = 0.0;
  Vector e(r);
  Vector a(dim);
  for (int t = 0; t < q; ++t) {
    for (int i = 0; i < r; ++i) {
      const auto j = static_cast<std::size_t>(t + i);
      e(i) = z[j] - targets[j];
    }
    const double errNorm2 = e.squaredNorm();
    out.mults += static_cast<std::uint64_t>(r);
    if (errNorm2 <= s.rho) continue;
    ++out.violations;

    a.setZero();
    for (int i = 0; i < r; ++i) a += e(i) * reduced[static_cast<std::size_t>(t + i)];
    const double c = a.squaredNorm();
    out.mults += static_cast<std::uint64_t>(r + 1) * ud;
    if (c == 0.0) {
      ++out.skipped;
      continue;
    }
    const double wt = w[static_cast<std::size_t>(t)];
    const double slack = s.rho - errNorm2;
    const double scale = (wt * slack) / (2.0 * c);
    f += scale * a;
    const double ell = (wt * (slack * slack)) / (4.0 * c);
    ellSum += ell;
    deltaEnergy += ell * wt;
    out.mults += 7 + ud;
  }

  out.violated = out.violations > 0;
  if (out.violations == out.skipped) return out;

  const double fNorm2 = f.squaredNorm();
  out.mults += ud;
  if (!(fNorm2 > tol::kCancellation * deltaEnergy)) {
    out.cancelled = true;
    return out;
  }
  out.relaxation = ellSum / fNorm2;
  const double step = s.lambda * out.relaxation;
  out.hNext = hTilde + step * f;
  out.mults += 2 + ud;
  out.moved = true;
  return out;
}

KrrApsp::KrrApsp(KrrParams params, Index n, InitMode init, std::optional<Vector> initVector)
    : params_(std::move(params)),
      n_(n),
      init_(init),
      initVector_(std::move(initVector)),
      est_((params_.validate(n), params_.mode), n, params_.gamma) {
  if (init_ == InitMode::Vector && (!initVector_ || initVector_->size() != n)) {
    throw ConfigError("KRR-APSP: vector initialization needs a length-N vector");
  }
}

std::string KrrApsp::name() const {
  return fmt::format("krr-apsp(D={},q={},r={},rho={},lambda={},m={})", params_.rank, params_.q,
                     params_.r, params_.rho, params_.lambda, params_.refreshPeriod);
}

Vector KrrApsp::fullCoefficients() const {
  if (!basis_) return Vector::Zero(n_);
  return basis_->lift(hTilde_);
}

bool KrrApsp::refreshDue() const {
  if (!basis_) {
    return est_.mature(params_.warmupFactor) && est_.snapshotP().norm() > tol::kDegenerateNorm;
  }
  return k_ % params_.refreshPeriod == 1 % params_.refreshPeriod;
}

void KrrApsp::rebase(BasisMatrix next) {
  if (next.ambientDim() != n_) throw DimensionError("KRR-APSP: basis dimension mismatch");
  if (!basis_) {
    basis_ = std::move(next);
    hTilde_ = init_ == InitMode::Vector ? basis_->reduce(*initVector_) : Vector::Zero(basis_->rank());
  } else {
    Vector carried = Vector::Zero(next.rank());
    const Index keep = std::min(next.rank(), hTilde_.size());
    carried.head(keep) = hTilde_.head(keep);
    hTilde_ = std::move(carried);
    basis_ = std::move(next);
  }
  reducedValid_ = false;
}

void KrrApsp::refreshBasis(MultBreakdown& mults) {
  OpCounter counter;
  try {
    BasisMatrix next = buildKrylovBasis(est_.snapshotR(), est_.snapshotP(), params_.rank, -1.0,
                                        k_ + 1, &counter);
    rebase(std::move(next));
  } catch (const DegenerateError&) {
    // keep the current basis (or stay in pass-through)
  }
  mults.basis += counter.mults;
}

StepOutput KrrApsp::step(const Vector& u, double d) {
  if (u.size() != n_) throw DimensionError("KRR-APSP: regressor length mismatch");
  StepOutput out;
  const auto window = static_cast<std::size_t>(params_.q + params_.r - 1);

  ring_.push_front(u);
  targets_.push_front(d);
  while (ring_.size() > window) {
    ring_.pop_back();
    targets_.pop_back();
  }
  OpCounter estCounter;
  est_.update(u, d, &estCounter);
  out.breakdown.estimation = estCounter.mults;

  bool violated = false;
  if (basis_) {
    const auto dn = static_cast<std::uint64_t>(basis_->rank() * n_);
    if (reducedValid_) {
      reducedRing_.push_front(basis_->reduce(u));
      out.breakdown.update += dn;
    } else {
      reducedRing_.clear();
      for (const Vector& col : ring_) reducedRing_.push_back(basis_->reduce(col));
      out.breakdown.update += dn * ring_.size();
      reducedValid_ = true;
    }
    while (reducedRing_.size() > window) reducedRing_.pop_back();

    out.y = hTilde_.dot(reducedRing_.front());
    const std::vector<Vector> cols(reducedRing_.begin(), reducedRing_.end());
    const std::vector<double> ds(targets_.begin(), targets_.end());
    const ApspSettings settings{params_.q, params_.r, params_.rho, params_.lambda,
                                std::span<const double>(params_.weights)};
    ApspResult res = apspUpdate(hTilde_, cols, ds, settings);
    out.breakdown.update += res.mults;
    violated = res.violated;
    out.relaxation = res.relaxation;
    skipped_ += res.skipped;
    if (res.cancelled) ++cancelled_;
    hTilde_ = std::move(res.hNext);
  }

  if (refreshDue()) refreshBasis(out.breakdown);

  out.updated = violated;
  updateHistory_.push_back(violated);
  out.hFull = fullCoefficients();
  out.mults = out.breakdown.total();
  totalMults_ += out.mults;
  ++k_;
  return out;
}

}  // namespace rrapsp
