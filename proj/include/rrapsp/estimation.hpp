#pragma once

#include <cstdint>

#include "rrapsp/linalg.hpp"

namespace rrapsp {

enum class EstimateMode { Toeplitz, FullSymmetric };

/// Exponentially weighted estimates of R = E{u uᵀ} and p = E{u d}.
///
/// Raw weighted sums, no (1 − γ) normalization: the Krylov subspace and the
/// Wiener solution are invariant to a common positive scale of (R̂, p̂).
class StatEstimates {
 public:
  /// Throws ConfigError unless 0 < gamma < 1 and n >= 1.
  StatEstimates(EstimateMode mode, Index n, double gamma);

  /// Toeplitz: r̂ ← γ r̂ + u(0)·u. FullSymmetric: R̂ ← γ R̂ + u uᵀ (upper
  /// triangle). Both: p̂ ← γ p̂ + d u.
  void update(const Vector& u, double d, OpCounter* counter = nullptr);

  SymMatrix snapshotR() const;
  Vector snapshotP() const { return pHat_; }

  EstimateMode mode() const { return mode_; }
  Index dim() const { return n_; }
  double gamma() const { return gamma_; }
  std::int64_t sampleCount() const { return samples_; }

  /// True once sampleCount >= N·warmupFactor.
  bool mature(double warmupFactor = 1.0) const;

 private:
  EstimateMode mode_;
  Index n_;
  double gamma_;
  std::int64_t samples_ = 0;
  Vector rRow_;  // Toeplitz first row
  Matrix rFull_;  // upper triangle only in FullSymmetric mode
  Vector pHat_;
};

inline StatEstimates initEstimates(EstimateMode mode, Index n, double gamma) {
  return StatEstimates(mode, n, gamma);
}

}  // namespace rrapsp

namespace rrapsp {

/// Value-semantics form of StatEstimates::update.
inline StatEstimates updateEstimates(StatEstimates est, const Vector& u, double d) {
  est.update(u, d);
  return est;
}

}  // namespace rrapsp
