#pragma once

// Numerical tolerances shared by the library and its tests.

namespace rrapsp::tol {

/// Max |SᵀS − I| accepted for any basis the library produces.
inline constexpr double kOrthonormality = 1e-10;

/// Krylov breakdown: a new Lanczos direction whose norm after
/// reorthogonalization falls below this fraction of ‖R q_j‖ ends the basis.
inline constexpr double kKrylovBreakdownRel = 1e-10;

/// ‖p̂‖ at or below this value is treated as a degenerate cross-correlation.
inline constexpr double kDegenerateNorm = 1e-12;

/// Quadratic forms more negative than this are rejected as non-PSD.
inline constexpr double kNegativeQuadratic = -1e-12;

/// Σ w = 1 tolerance for projection weights.
inline constexpr double kWeightSum = 1e-12;

/// ‖f̃‖² below this value is treated as exact cancellation of the parallel
/// projection directions (no update).
inline constexpr double kCancellation = 1e-14;

/// Singular-value threshold when extracting Fix(S_kᵀS_{k+1}).
inline constexpr double kFixedPointEig = 1e-8;

/// Convergence criterion for the iterative projection oracles.
inline constexpr double kOracleFixedPoint = 1e-10;

/// Slack on monotone-approximation distance comparisons.
inline constexpr double kMonotone = 1e-10;

}  // namespace rrapsp::tol
