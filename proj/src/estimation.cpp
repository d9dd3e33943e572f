#include "rrapsp/estimation.hpp"

#include <string>

#include "rrapsp/error.hpp"

namespace rrapsp {

StatEstimates::StatEstimates(EstimateMode mode, Index n, double gamma)
    : mode_(mode), n_(n), gamma_(gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("StatEstimates: forgetting factor must lie in (0, 1), got " +
                      std::to_string(gamma));
  }
  if (n < 1) throw ConfigError("StatEstimates: dimension must be positive");
  pHat_ = Vector::Zero(n);
  if (mode_ == EstimateMode::Toeplitz) {
    rRow_ = Vector::Zero(n);
  } else {
    rFull_ = Matrix::Zero(n, n);
  }
}

void StatEstimates::update(const Vector& u, double d, OpCounter* counter) {
  if (u.size() != n_) {
    throw DimensionError("StatEstimates::update: regressor length " + std::to_string(u.size()) +
                         " != " + std::to_string(n_));
  }
  const auto un = static_cast<std::uint64_t>(n_);
  if (mode_ == EstimateMode::Toeplitz) {
    rRow_ = gamma_ * rRow_ + u(0) * u;
    count(counter, 2 * un);
  } else {
    for (Index j = 0; j < n_; ++j) {
      for (Index i = 0; i <= j; ++i) rFull_(i, j) = gamma_ * rFull_(i, j) + u(i) * u(j);
    }
    count(counter, un * (un + 1));
  }
  pHat_ = gamma_ * pHat_ + d * u;
  count(counter, 2 * un);
  ++samples_;
}

SymMatrix StatEstimates::snapshotR() const {
  if (mode_ == EstimateMode::Toeplitz) return SymMatrix::toeplitz(rRow_);
  return SymMatrix::fromUpper(rFull_);
}

bool StatEstimates::mature(double warmupFactor) const {
  return static_cast<double>(samples_) >= static_cast<double>(n_) * warmupFactor;
}

}  // namespace rrapsp
