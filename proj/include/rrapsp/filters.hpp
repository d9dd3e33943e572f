#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrapsp/estimation.hpp"
#include "rrapsp/linalg.hpp"

namespace rrapsp {

/// Multiplications spent in one step, split by where they were spent.
struct MultBreakdown {
  std::uint64_t estimation = 0;  // R̂, p̂ recursions
  std::uint64_t basis = 0;       // Krylov basis or CG solve
  std::uint64_t update = 0;      // filtering and coefficient update

  std::uint64_t total() const { return estimation + basis + update; }
};

struct StepOutput {
  double y = 0.0;           // a-priori output with the coefficients in force at this step
  bool updated = false;     // some projection constraint was violated
  Vector hFull;             // coefficients in force for the next step
  std::uint64_t mults = 0;
  MultBreakdown breakdown;
  double relaxation = 1.0;  // M_k (1 when nothing fired)
};

/// Streaming adaptive filter driven one (u_k, d_k) pair at a time.
class AdaptiveFilter {
 public:
  virtual ~AdaptiveFilter() = default;

  virtual StepOutput step(const Vector& u, double d) = 0;
  /// h_k in R^N.
  virtual Vector fullCoefficients() const = 0;
  virtual std::string name() const = 0;
  virtual Index dim() const = 0;
};

// ---------------------------------------------------------------------------
// KRR-APSP

struct KrrParams {
  Index rank = 5;                   // D
  int q = 1;                        // parallel projections per step
  int r = 1;                        // error-vector dimension
  double rho = 0.0;                 // error bound
  int refreshPeriod = 10;           // m
  double lambda = 1.0;              // relaxation in [0, 2]
  std::vector<double> weights;      // empty: uniform 1/q
  double gamma = 0.999;
  EstimateMode mode = EstimateMode::Toeplitz;
  double warmupFactor = 1.0;        // first basis once sampleCount >= N·warmupFactor

  /// Throws ConfigError on any violated range.
  void validate(Index n) const;
};

enum class InitMode { Zero, Vector };

/// Scalar knobs of one parallel subgradient projection step.
struct ApspSettings {
  int q = 1;
  int r = 1;
  double rho = 0.0;
  double lambda = 1.0;
  std::span<const double> weights;  // empty: uniform
};

struct ApspResult {
  Vector hNext;
  bool violated = false;      // some ‖e_ι‖² > ρ
  bool moved = false;         // h̃ actually changed
  double relaxation = 1.0;    // M_k
  int violations = 0;
  int skipped = 0;            // violating ι with a zero subgradient
  bool cancelled = false;     // Σδ̃ vanished although some ι violated
  std::uint64_t mults = 0;
};

/// One reduced-space update in the efficient (table) form.
///
/// `reduced` holds ũ_k, ũ_{k-1}, ... (newest first) already expressed in the
/// current basis, `targets` the matching d values. When fewer than q + r − 1
/// columns are available, r and then q shrink to what the data supports.
ApspResult apspUpdate(const Vector& hTilde, std::span<const Vector> reduced,
                      std::span<const double> targets, const ApspSettings& settings);

/// Krylov reduced-rank adaptive parallel subgradient projection filter.
class KrrApsp : public AdaptiveFilter {
 public:
  /// Throws ConfigError when params are invalid for dimension n (e.g. D > N)
  /// or when InitMode::Vector is requested without a length-N vector.
  KrrApsp(KrrParams params, Index n, InitMode init = InitMode::Zero,
          std::optional<Vector> initVector = std::nullopt);

  StepOutput step(const Vector& u, double d) override;
  Vector fullCoefficients() const override;
  std::string name() const override;
  Index dim() const override { return n_; }

  /// Move the filter into a new basis through Φ_k = S_{k+1}S_kᵀ: reduced
  /// coordinates carry over (zero-padded or truncated when the rank changes),
  /// so h_{k+1} = Φ_k h_k. Cached reduced regressors are invalidated.
  void rebase(BasisMatrix next);

  const KrrParams& params() const { return params_; }
  const Vector& hTilde() const { return hTilde_; }
  const std::optional<BasisMatrix>& basis() const { return basis_; }
  const StatEstimates& estimates() const { return est_; }
  std::int64_t iteration() const { return k_; }
  /// (u, d) pairs of the last q + r − 1 steps, newest first.
  const std::deque<Vector>& regressors() const { return ring_; }
  const std::deque<double>& targets() const { return targets_; }
  const std::vector<bool>& updateHistory() const { return updateHistory_; }
  std::int64_t skippedSubgradients() const { return skipped_; }
  std::int64_t cancellations() const { return cancelled_; }
  std::uint64_t totalMults() const { return totalMults_; }
  bool active() const { return basis_.has_value(); }

 private:
  bool refreshDue() const;
  void refreshBasis(MultBreakdown& mults);

  KrrParams params_;
  Index n_;
  InitMode init_;
  std::optional<Vector> initVector_;
  StatEstimates est_;
  std::optional<BasisMatrix> basis_;
  Vector hTilde_;
  std::deque<Vector> ring_;
  std::deque<double> targets_;
  std::deque<Vector> reducedRing_;
  bool reducedValid_ = false;
  std::int64_t k_ = 0;
  std::vector<bool> updateHistory_;
  std::int64_t skipped_ = 0;
  std::int64_t cancelled_ = 0;
  std::uint64_t totalMults_ = 0;
};

// ---------------------------------------------------------------------------
// CGRRF

/// Result of a truncated conjugate-gradient solve.
struct CgResult {
  Vector x;
  int iterations = 0;
  bool breakdown = false;
};

/// `iterations` CG steps on R x = p starting from x0; stops early on a
/// non-positive curvature direction or an exactly zero residual.
CgResult conjugateGradient(const SymMatrix& r, const Vector& p, const Vector& x0, int iterations,
                           OpCounter* counter = nullptr);

struct CgrrfParams {
  Index rank = 5;
  int refreshPeriod = 10;
  double gamma = 0.999;
  EstimateMode mode = EstimateMode::Toeplitz;
  double warmupFactor = 1.0;

  void validate(Index n) const;
};

/// Conjugate-gradient reduced-rank filter: every m steps, D CG iterations on
/// R̂ h = p̂ from a fixed initial vector; coefficients are held in between.
class Cgrrf : public AdaptiveFilter {
 public:
  Cgrrf(CgrrfParams params, Index n, std::optional<Vector> initial = std::nullopt);

  StepOutput step(const Vector& u, double d) override;
  Vector fullCoefficients() const override { return h_; }
  std::string name() const override;
  Index dim() const override { return n_; }

  const StatEstimates& estimates() const { return est_; }
  std::int64_t breakdowns() const { return breakdowns_; }

 private:
  CgrrfParams params_;
  Index n_;
  Vector initial_;
  StatEstimates est_;
  Vector h_;
  bool solved_ = false;
  std::int64_t k_ = 0;
  std::int64_t breakdowns_ = 0;
};

// ---------------------------------------------------------------------------
// Full-rank baselines

class Nlms : public AdaptiveFilter {
 public:
  Nlms(Index n, double stepSize, Vector h0 = {});

  StepOutput step(const Vector& u, double d) override;
  Vector fullCoefficients() const override { return h_; }
  std::string name() const override;
  Index dim() const override { return h_.size(); }

 private:
  double mu_;
  Vector h_;
};

/// Exponentially weighted RLS with P₀ = δ⁻¹ I.
class Rls : public AdaptiveFilter {
 public:
  Rls(Index n, double forgetting, double delta, Vector h0 = {});

  StepOutput step(const Vector& u, double d) override;
  Vector fullCoefficients() const override { return h_; }
  std::string name() const override;
  Index dim() const override { return h_.size(); }

 private:
  double lambda_;
  double delta_;
  Vector h_;
  Matrix p_;
};

/// fullCoefficients() through the common interface.
inline Vector fullCoefficients(const AdaptiveFilter& f) { return f.fullCoefficients(); }

}  // namespace rrapsp
