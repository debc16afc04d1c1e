#pragma once

#include <cstdint>
#include <vector>

#include "binutil/binomial_core.hpp"

namespace binutil {

/// Coefficients of the martingale-measure density Z_n = exp(-a * w - b) of the
/// n-step model with up-probability p, together with their two-term
/// large-n expansions.
struct MartingaleCoefficients {
  std::int64_t n = 0;
  double p = 0.5;
  double a = 0.5;
  double b = 0.0;
  double a_asym2 = 0.5;
  double b_asym2 = 0.125;
  /// a - a_asym2 and b - b_asym2, formed in extended precision before
  /// rounding. The b remainder is O(n^-2) and sits within a few ulps of b
  /// for large n, so differencing the rounded fields would be noise.
  double a_remainder = 0.0;
  double b_remainder = 0.0;
  /// Set when the coefficients were requested outside p in [1/2, 1).
  bool probe = false;
};

/// Standardized one-step outcomes: z_{1,0} = -sqrt(p/(1-p)) and
/// z_{1,1} = sqrt((1-p)/p).
double down_tick(double p);
double up_tick(double p);

/// Exact coefficients. p = 1/2 uses a = 1/2, b = n log cosh(1/(2 sqrt n));
/// p in (1/2, 1) uses the closed-form martingale condition with expm1-based
/// kernels. Throws std::domain_error for n < 1 or p outside [1/2, 1) unless
/// probe is set (then any p in (0, 1) is accepted and the result is flagged).
MartingaleCoefficients coefficients(std::int64_t n, double p, bool probe = false);

/// |q e^{u} + (1 - q) e^{d} - 1| with q = p exp(-a z_{1,1}/sqrt n - b/n),
/// u = z_{1,1}/sqrt n, d = z_{1,0}/sqrt n: zero when the one-step price is a
/// martingale under the weights the coefficients encode.
double one_step_risk_neutral_residual(const MartingaleCoefficients& coeffs);

/// Continuous-model density Z = exp(-x/2 - 1/8).
double log_density_continuous(double x);

/// Density values of the discrete measure on a grid, kept as logarithms.
struct DensityEval {
  std::vector<double> log_z;  // -a z_k - b
  double total_mass = 0.0;    // sum_k Z_n(z_k) f_k, compensated
};

/// Throws std::invalid_argument if grid and coefficients disagree on (n, p).
DensityEval density_on_grid(const BinomialGrid& grid, const MartingaleCoefficients& coeffs);

}  // namespace binutil
