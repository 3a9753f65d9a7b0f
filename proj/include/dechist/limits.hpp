#pragma once

// Acceptance tolerances shared by the experiment reports and the acceptance
// battery. These are contract constants: report rows must quote exactly these.

namespace dechist::limits {

inline constexpr double conserved_epsilon = 1e-10;   // normalized off-diagonals
inline constexpr double oracle_agreement = 1e-11;    // entrywise |D - oracle|
inline constexpr double probability_total = 1e-10;   // |sum p - 1|
inline constexpr double sum_rule_slack = 1e-12;      // residual vs off-diag bound

inline constexpr double n_slope_expected = -1.0;     // ratio vs N, uncorrelated
inline constexpr double n_slope_tol = 0.05;
inline constexpr double v_slope_expected = -1.0;     // ratio vs V, correlated
inline constexpr double v_slope_tol = 0.1;
inline constexpr double uncorrelated_ratio = 1e-10;  // factorized quadrature
inline constexpr double prefactor_rel_tol = 0.10;    // constant-kernel prefactor

inline constexpr double mc_z_limit = 3.0;            // Monte Carlo z-scores

inline constexpr double small_k_slope_expected = 2.0;
inline constexpr double small_k_slope_tol = 0.1;
inline constexpr double tiny_k_ratio_tol = 1e-6;     // |ratio - 1| at k sigma = 1e-4

inline constexpr double d_fit_rel_tol = 0.02;
inline constexpr double fit_linearity_tol = 0.01;    // rms residual / range
inline constexpr double late_residual_tol = 0.05;    // t >= 10/gamma

}  // namespace dechist::limits
