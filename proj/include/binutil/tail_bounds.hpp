#pragma once

// Gaussian domination of the standardized binomial law: local cell-by-cell
// constants, global tail constants, and the analytic certificate
// g_n(w) = alpha(w) n + beta_n(w) that bounds the local log-ratio.

#include <cstdint>
#include <optional>
#include <vector>

#include "binutil/binomial_core.hpp"

namespace binutil {

enum class TailSide { kLeft, kRight };

/// First and last admissible k for a side: [floor(np), n] on the right,
/// [0, ceil(np)] on the left.
std::int64_t side_begin(const BinomialGrid& grid, TailSide side);
std::int64_t side_end(const BinomialGrid& grid, TailSide side);

/// log[f_k / (dz * phi(z_{k+1}))] on the right, log[f_k / (dz * phi(z_{k-1}))]
/// on the left. Throws std::domain_error if k is not admissible for the side.
double log_local_ratio(const BinomialGrid& grid, std::int64_t k, TailSide side);
/// exp(log_local_ratio); underflows to 0 in the extreme cells of large grids.
double local_ratio(const BinomialGrid& grid, std::int64_t k, TailSide side);

/// Minimal Gaussian dominance constants of one (n, p) law.
///
/// Constants are carried as logarithms as well: the left-side constant grows
/// like exp(c n) once p > 1/2 and overflows a double for large n.
struct TailBoundReport {
  std::int64_t n = 0;
  double p = 0.5;
  double c_right = 0.0;
  double c_left = 0.0;
  std::int64_t argmax_right = 0;
  std::int64_t argmax_left = 0;
  double c_global_right = 0.0;
  double c_global_left = 0.0;
  double log_c_right = 0.0;
  double log_c_left = 0.0;
  double log_c_global_right = 0.0;
  double log_c_global_left = 0.0;
  bool probe = false;
};

struct GlobalConstants {
  double log_c_global_left = 0.0;
  double log_c_global_right = 0.0;
};

/// sup F_n(x)/Phi(x) over x in {0} u {z_k <= 0}, and sup Fbar_n(x)/Phibar(x)
/// over x in {0} u {z_k >= 0}, as logarithms. Fbar_n(x) = P[xi_n > x].
GlobalConstants global_tail_dominance(const BinomialGrid& grid);

/// Exhaustive scan of both sides plus the global constants. Throws
/// std::domain_error for p outside [1/2, 1) unless probe is set.
TailBoundReport minimal_constant(const BinomialGrid& grid, bool probe = false);
TailBoundReport minimal_constant(std::int64_t n, double p, bool probe = false);

/// The analytic bound family. Closed forms for p = 1/2 and for p in (1/2, 1);
/// they agree at p = 1/2.
class BoundFunctions {
 public:
  /// Throws std::domain_error for p outside [1/2, 1).
  explicit BoundFunctions(double p);

  double p() const { return p_; }
  bool symmetric() const { return p_ == 0.5; }

  double alpha(double w) const;
  double alpha_d1(double w) const;
  double alpha_d2(double w) const;
  double alpha_d3(double w) const;
  double alpha_d4(double w) const;
  double beta(double w, std::int64_t n) const;
  double beta_d1(double w) const;
  double g(double w, std::int64_t n) const { return alpha(w) * static_cast<double>(n) + beta(w, n); }

  /// The constant (1 - 2p) / ((p - 1)^2 p^2), which is alpha'''(p).
  double alpha_d3_at_p() const;
  /// n -> infinity limit of beta_n(w).
  double beta_limit(double w) const;

 private:
  double p_;
};

struct GBoundCheck {
  std::int64_t n = 0;
  double p = 0.5;
  /// max_k of log(sqrt(np(1-p)) f_k / phi(z_{k+1})) - g_n(k/n) over
  /// floor(np) < k <= n - 1; -inf when the range is empty.
  double max_margin = 0.0;
  std::optional<std::int64_t> argmax;
  /// Log-ratio in the extreme cell k = n, checked directly rather than via
  /// g_n: log(p^n) - log(dz phi(z_{n+1})).
  double extreme_cell_log_ratio = 0.0;
};

GBoundCheck g_bound_check(std::int64_t n, double p);
GBoundCheck g_bound_check(const BinomialGrid& grid);

/// Finite-difference verification of the alpha derivatives on sampled w.
struct AlphaDerivativeCheck {
  double p = 0.5;
  std::size_t samples = 0;
  /// Largest relative deviation between a Richardson-extrapolated central
  /// difference of each closed form and the next closed-form derivative.
  double max_rel_error_d1 = 0.0;
  double max_rel_error_d2 = 0.0;
  double max_rel_error_d3 = 0.0;
  double max_rel_error_d4 = 0.0;
  /// alpha, alpha', alpha'' at w = p.
  double alpha_at_p = 0.0;
  double alpha_d1_at_p = 0.0;
  double alpha_d2_at_p = 0.0;
  /// alpha'''(p) against the constant (1 - 2p)/((p-1)^2 p^2).
  double alpha_d3_at_p_error = 0.0;
  /// max over sampled w of |alpha'''(w) - alpha'''(p)|; zero would mean
  /// alpha''' is constant on (p, 1).
  double alpha_d3_variation = 0.0;
  /// Strict negativity and decrease of alpha, alpha', alpha'' and alpha'''
  /// on the sample; positivity and increase of beta_n.
  bool alpha_negative_decreasing = false;
  bool beta_positive_increasing = false;
};

/// Chebyshev-spaced samples in (p + 1e-6, 1 - 1e-6).
std::vector<double> chebyshev_samples(double lo, double hi, std::size_t count);

AlphaDerivativeCheck alpha_derivative_check(double p, std::size_t samples = 512);

/// Central-difference derivative with Richardson extrapolation (Ridders).
/// Returns the estimate and writes the error estimate if requested.
template <class F>
double ridders_derivative(F&& f, double x, double h, double* error = nullptr);

}  // namespace binutil

#include "binutil/detail/ridders.hpp"
