#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrapsp/filters.hpp"
#include "rrapsp/linalg.hpp"
#include "rrapsp/rng.hpp"
#include "rrapsp/scenarios.hpp"

namespace rrapsp {

// ---------------------------------------------------------------------------
// Φ_k = S_{k+1} S_kᵀ

struct PhiMap {
  BasisMatrix sPrev;  // S_k
  BasisMatrix sNext;  // S_{k+1}
};

/// S_{k+1}(S_kᵀ x). Bases of different rank are joined through the
/// zero-padding/truncation embedding used by KrrApsp::rebase.
Vector applyPhi(const PhiMap& phi, const Vector& x);
Matrix phiMatrix(const PhiMap& phi);
/// True when the leading min(D_k, D_{k+1}) columns agree to tol; Φ is then
/// the orthogonal projection onto the smaller of the two ranges.
bool sameBasis(const PhiMap& phi, double tol = 1e-14);

struct FixedPointSpace {
  Matrix reduced;  // D×f, orthonormal basis of Fix(S_kᵀS_{k+1})
  Matrix full;     // N×f, its image S_k z̃ (= S_{k+1} z̃)
  double maxResidual = 0.0;  // max over basis vectors of ‖Φv − v‖ and ‖S_{k+1}z̃ − S_k z̃‖
  Index dim() const { return full.cols(); }
};

/// Fix(Φ_k) = {S_k z̃ : S_{k+1}z̃ = S_k z̃}, from the null space of
/// S_{k+1} − S_k (singular values at or below tol).
FixedPointSpace fixedPointSet(const PhiMap& phi, double tol = 1e-8);

struct AttractingReport {
  bool sameBasis = false;
  bool passed = false;
  double maxViolation = 0.0;
  int trials = 0;
  Vector witness;  // z* = S_k z̃* outside Fix with ‖Φz*‖ = ‖z*‖ (bases differ)
};

/// Equal bases: 1-attracting identity ‖x − Φx‖² = ‖x − f‖² − ‖Φx − f‖² on
/// random (x, f ∈ Fix). Different bases: builds the non-attracting witness.
/// Throws NumericalError when the bases differ but no witness exists.
AttractingReport attractingCheck(const PhiMap& phi, int trials, Rng& rng);

// ---------------------------------------------------------------------------
// Θ_k and the reduced-rank projected subgradient step

struct ThetaInstance {
  std::vector<HalfSpace> halfSpaces;  // H⁻_ι(h_k) in R^N
  BasisMatrix basis;                  // S_k
  std::vector<double> weights;
  Vector anchor;                      // h_k ∈ R(S_k)
};

/// Half-spaces of the active index set built from the newest-first data
/// window, clamped exactly like the filter's start-up handling.
ThetaInstance makeThetaInstance(const BasisMatrix& basis, const Vector& anchor,
                                std::span<const Vector> regressors, std::span<const double> targets,
                                int q, int r, double rho, std::span<const double> weights = {});

struct ConstrainedProjection {
  Vector point;
  bool empty = false;      // H⁻ ∩ R(S) = ∅
  bool certified = false;  // optimality conditions verified
  int iterations = 0;
};

/// Projection of x ∈ R(S) onto H ∩ R(S) in closed form.
ConstrainedProjection projectOntoSliced(const Vector& x, const HalfSpace& h, const BasisMatrix& s);

/// Projection of arbitrary x onto H ∩ R(S) by Dykstra's alternating scheme,
/// certified through the hyperplane and subspace optimality conditions.
ConstrainedProjection dykstraProjection(const Vector& x, const HalfSpace& h, const BasisMatrix& s,
                                        double tolerance = 1e-10, int maxIterations = 200000);

/// d(x, H_ι ∩ R(S)); +inf when the set is empty.
double slicedDistance(const Vector& x, const HalfSpace& h, const BasisMatrix& s);

/// Θ_k(h).
double thetaValue(const ThetaInstance& inst, const Vector& h);
/// The subgradient (1/L) Σ w_ι (h_k − P_ι(h_k)) at the anchor.
Vector thetaSubgradient(const ThetaInstance& inst);

/// Full-space projected subgradient update through Φ_k:
/// Φ_k[h + λ M (Σ w_ι P_ι(h) − h)] with P_ι onto H⁻_ι ∩ R(S_k).
Vector rapsmStep(const Vector& h, const ThetaInstance& inst, const PhiMap& phi, double lambda);

/// Reduced-space update built from explicit half-spaces (projectHalfSpace)
/// and an explicit M_k, independent of apspUpdate's bookkeeping.
Vector directReducedUpdate(const Vector& hTilde, std::span<const Matrix> reducedBlocks,
                           std::span<const Vector> targetBlocks, double rho, double lambda,
                           std::span<const double> weights);

// ---------------------------------------------------------------------------
// Monotone approximation

struct ProbeStep {
  Vector h;       // h_k
  Vector hNext;   // h_{k+1}
  ThetaInstance inst;
  PhiMap phi;
  double lambda = 0.0;
};

/// A point of ∩ H⁻_ι within span(F) found by cyclic projections, or nullopt.
std::optional<Vector> findFeasiblePoint(std::span<const HalfSpace> halfSpaces, const Matrix& span,
                                        const Vector& start, int maxSweeps = 20000);

struct TheoremProbe {
  double eps1 = 0.0;
  double eps2 = 0.0;
  int steps = 0;
  int certified = 0;
  int unchecked = 0;
  int violations = 0;        // certified steps whose distance grew beyond tol::kMonotone
  int strictEligible = 0;    // certified, Θ_k(h_k) > 0 and λ ∈ (0, 2)
  int strictDecreases = 0;
  double maxIncrease = 0.0;  // max over certified steps of ‖h_{k+1}−f‖ − ‖h_k−f‖
  std::optional<Vector> feasiblePoint;  // the last certifying point
  std::vector<double> distances;  // ‖h_k − f‖ at certified steps
  std::vector<double> thetaValues;  // Θ_k(h_k) at every step
  std::vector<double> subgradientNorms;

  double certifiedFraction() const { return steps == 0 ? 0.0 : static_cast<double>(certified) / steps; }
};

/// Steps where no point of ∩H⁻_ι ∩ Fix(Φ_k) is found are unchecked.
TheoremProbe monotoneProbe(std::span<const ProbeStep> trajectory);

struct ProbeRun {
  std::vector<ProbeStep> steps;
  int warmupSteps = 0;
};

/// Drive `filter` with samples from `next` and record every step taken with
/// an active basis, until `activeSteps` are collected.
ProbeRun recordTrajectory(KrrApsp& filter, const std::function<StreamSample()>& next,
                          int activeSteps, int maxWarmup = 100000);

struct MonotoneSetup {
  Index n = 20;
  Index rank = 4;
  int q = 3;
  int r = 1;
  double rho = 0.05;
  double lambda = 0.5;
  int refreshPeriod = 100;
  double snrDb = 15.0;
  int steps = 500;
  std::uint64_t seed = 1;
};

/// Static system identification run recorded for the monotone probe.
TheoremProbe runMonotoneExperiment(const MonotoneSetup& setup);

// ---------------------------------------------------------------------------
// CG bound and subgradient projection checks

struct CgBoundReport {
  double mse = 0.0;        // f(P^{(R)}_{K_D}(h*))
  double bound = 0.0;      // [4α^{2D} − 1]‖h*‖²_R + σ_d²
  double kappa = 0.0;
  double alpha = 0.0;      // (√κ − 1)/(√κ + 1)
  double chain[4] = {0, 0, 0, 0};  // the Euclidean identifiability chain, left to right
  double minSlack = 0.0;   // smallest slack over all inequalities (≥ 0 when they hold)
  bool passed = false;
};

/// R-norm best approximation of h* in K_D(R, p), the MSE bound from the CG
/// error estimate, and the Rayleigh-Ritz identifiability chain.
CgBoundReport cgBoundCheck(const SymMatrix& r, const Vector& p, const Vector& hStar, Index rank,
                           double sigmaD2);

struct SubgradientReport {
  double maxViolation = 0.0;  // max of ⟨x−y, g'(y)⟩ + g(y) − g(x)
  double boundaryResidual = 0.0;
  bool noOpAtFeasible = true;
  bool passed = false;
};

/// g(h̃) = ‖UᵀS h̃ − d‖² − ρ with gradient 2SᵀU e: subgradient inequality on
/// random samples, and the subgradient projection landing in its half-space.
SubgradientReport subgradientProjectionCheck(const Matrix& s, const Matrix& u, const Vector& d,
                                             double rho, const Vector& point, int samples, Rng& rng);

// ---------------------------------------------------------------------------
// Suite

struct CheckResult {
  std::string name;
  bool passed = false;
  double maxViolation = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool allPassed() const;
  std::string format() const;
};

enum class VerifyGroup : unsigned {
  Orthonormality = 1U << 0,
  Equivalence = 1U << 1,  // table form vs direct projections vs full-space step, M >= 1
  Phi = 1U << 2,
  Monotone = 1U << 3,
  CgBound = 1U << 4,
  Subgradient = 1U << 5,
  NlmsReduction = 1U << 6,
  Asymptotic = 1U << 7,
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  unsigned groups = ~0U;  // bitwise or of VerifyGroup values
  bool enabled(VerifyGroup g) const { return (groups & static_cast<unsigned>(g)) != 0; }
  int basisPairs = 100;
  int equivalenceInstances = 200;
  int cgInstances = 50;
  int monotoneSteps = 500;
};

VerifyReport runVerificationSuite(const VerifyOptions& options);

/// Random matrix with orthonormal columns.
Matrix randomOrthonormal(Index n, Index cols, Rng& rng);
/// AᵀA/n + shift·I with Gaussian A.
Matrix randomSpd(Index n, Rng& rng, double shift = 0.1);

}  // namespace rrapsp
