#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rrapsp/linalg.hpp"
#include "rrapsp/rng.hpp"

namespace rrapsp {

/// One (u_k, d_k) pair plus the hidden truth used for metrics.
struct StreamSample {
  Vector u;
  double d = 0.0;
  Vector truthH;      // current h* (system identification) or MMSE receiver (CDMA)
  int truthBit = 0;   // desired user's bit (CDMA), 0 otherwise
  std::int64_t k = 0;
};

// ---------------------------------------------------------------------------
// System identification with colored input

struct SysIdConfig {
  Index n = 50;
  double snrDb = 15.0;
  bool noiseless = false;
  std::optional<std::int64_t> changeAt;  // h* jumps to a fresh system here
  int firLength = 30;
  bool unitEnergyFir = false;  // true: taps rescaled to unit energy (unit input power)
  std::uint64_t seed = 1;
  std::uint64_t trial = 0;

  std::string describe() const;
};

/// Fixed quantities of a system-identification run.
struct SysIdScenario {
  SysIdConfig config;
  Vector hStar;          // unit norm
  Vector hStarPost;      // unit norm; only meaningful with changeAt
  Vector coloringFir;    // unit energy
  double signalPower = 0.0;   // measured E{z²}, z = uᵀh*
  double noiseVariance = 0.0;
};

/// d_k = u_kᵀh* + n_k, u_k = [x_k, ..., x_{k-N+1}], x = FIR ∗ white.
///
/// Input, noise and system draws come from separate sub-streams, so a change
/// of h* leaves the input sequence and the noise samples untouched.
class SysIdStream {
 public:
  explicit SysIdStream(SysIdConfig config);

  const SysIdScenario& scenario() const { return scenario_; }
  StreamSample next();
  /// Input power E{x²} estimated during calibration.
  double inputPower() const { return inputPower_; }

 private:
  double nextColored();

  SysIdScenario scenario_;
  Rng inputRng_;
  Rng noiseRng_;
  std::vector<double> whiteHistory_;  // newest first, length firLength
  Vector delayLine_;                  // u_k
  double inputPower_ = 0.0;
  std::int64_t k_ = 0;
};

inline SysIdStream makeSysId(const SysIdConfig& config) { return SysIdStream(config); }

// ---------------------------------------------------------------------------
// CDMA interference suppression

/// All 33 length-31 Gold sequences (±1) from the preferred pair
/// x⁵+x²+1 / x⁵+x⁴+x³+x²+1 (octal 45, 75): both m-sequences first, then
/// m1 ⊕ shift_j(m2) for j = 0..30.
std::vector<std::vector<int>> goldFamily();

/// Periodic cross-correlation Σ_i a_i b_{(i+lag) mod L}.
int periodicCorrelation(const std::vector<int>& a, const std::vector<int>& b, int lag);

struct CdmaConfig {
  int users = 8;                         // K, desired user included
  double snrDb = 15.0;                   // desired-user bit energy over chip noise variance
  bool noiseless = false;
  double interfererAmplitude = 1.0;      // relative to the desired user
  std::optional<std::int64_t> changeAt;  // interferers replaced at this bit
  int usersPost = 2;                     // K after the change
  std::uint64_t seed = 1;
  std::uint64_t trial = 0;

  std::string describe() const;
};

struct CdmaScenario {
  CdmaConfig config;
  static constexpr Index kChips = 31;
  Matrix signatures;      // N×K, unit-norm columns, column 0 is the desired user
  Vector amplitudes;      // K
  Matrix signaturesPost;  // after the change (column 0 unchanged)
  Vector amplitudesPost;
  double noiseVariance = 0.0;
  Vector mmse;            // R⁻¹p before the change
  Vector mmsePost;
};

/// u_k = S A b_k + w_k with d_k = b_k[desired]. Interferer codes are random
/// cyclic shifts of distinct Gold sequences (code-asynchronous, chip-synchronous).
class CdmaStream {
 public:
  explicit CdmaStream(CdmaConfig config);

  const CdmaScenario& scenario() const { return scenario_; }
  StreamSample next();
  Vector desiredSignature() const;

 private:
  CdmaScenario scenario_;
  Rng bitRng_;
  Rng noiseRng_;
  std::int64_t k_ = 0;
};

inline CdmaStream makeCdma(const CdmaConfig& config) { return CdmaStream(config); }

}  // namespace rrapsp
