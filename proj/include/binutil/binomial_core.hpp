#pragma once

// Standardized binomial law on the lattice z_k = (k - np) / sqrt(np(1-p)) and
// the standard Gaussian reference it converges to.

#include <cstdint>
#include <span>
#include <vector>

namespace binutil {

/// Largest n for which a grid is materialized (two arrays of n+1 doubles).
inline constexpr std::int64_t kMaxGridSteps = 10'000'000;

/// The terminal law of the n-step standardized Bernoulli walk.
///
/// Immutable after construction. Probabilities are held as logarithms; the
/// tails underflow in linear space long before n reaches the grid limit.
class BinomialGrid {
 public:
  /// Throws std::domain_error unless 1 <= n <= kMaxGridSteps and 0 < p < 1.
  BinomialGrid(std::int64_t n, double p);

  std::int64_t n() const { return n_; }
  double p() const { return p_; }
  /// Grid spacing 1/sqrt(np(1-p)); equals 2/sqrt(n) at p = 1/2.
  double dz() const { return dz_; }
  std::span<const double> z() const { return z_; }
  std::span<const double> log_f() const { return log_f_; }
  double z(std::int64_t k) const { return z_[static_cast<std::size_t>(k)]; }
  double log_f(std::int64_t k) const { return log_f_[static_cast<std::size_t>(k)]; }
  double f(std::int64_t k) const;

  /// Lattice coordinate for any integer k, including the virtual points
  /// k = -1 and k = n + 1 that sit one spacing beyond the support.
  double lattice_point(std::int64_t k) const;

  /// Index of the last atom with z_k <= x, or -1 if there is none.
  std::int64_t last_index_at_or_below(double x) const;

 private:
  std::int64_t n_;
  double p_;
  double dz_;
  double mean_steps_;  // np
  std::vector<double> z_;
  std::vector<double> log_f_;
};

/// Convenience wrapper matching the free-function style of the other modules.
BinomialGrid build_grid(std::int64_t n, double p);

/// log of C(n,k) p^k (1-p)^(n-k), via the saddle-point (deviance plus
/// Stirling remainder) form of the log-gamma expression. Accurate to a few
/// ulps of |log f| for every k. Throws std::domain_error for k outside [0, n],
/// n < 1 or p outside (0, 1).
double log_pmf(std::int64_t n, double p, std::int64_t k);

/// P[xi_n <= x], summed from k = 0 upwards with compensation.
double cdf(const BinomialGrid& grid, double x);
/// P[xi_n > x], summed from k = n downwards with compensation.
double survival(const BinomialGrid& grid, double x);

/// log P[xi_n <= z_k] for every k, and log P[xi_n > z_k] for every k
/// (the latter is -inf at k = n). Accumulated from the thin end of each tail.
struct CumulativeTails {
  std::vector<double> log_cdf;
  std::vector<double> log_survival;
};
CumulativeTails cumulative_tails(const BinomialGrid& grid);

/// Stirling remainder log Gamma(x+1) - log sqrt(2 pi) - (x + 1/2) log x + x.
double stirling_remainder(double x);

/// theta(x) = 12 x * stirling_remainder(x), the correction in
/// x! = sqrt(2 pi) x^(x+1/2) exp(-x + theta(x) / (12 x)). Lies in (0, 1) and
/// tends to 1; the correction theta(x)/(12x) itself tends to 0.
/// Throws std::domain_error for x <= 0.
double stirling_theta(double x);

/// Standard normal reference.
namespace gaussian {

double pdf(double x);
double log_pdf(double x);
/// Phi(x) = 1/2 erfc(-x / sqrt 2).
double cdf(double x);
/// 1 - Phi(x) = 1/2 erfc(x / sqrt 2); keeps relative accuracy in the far tail.
double survival(double x);
/// log(1 - Phi(x)), finite for all finite x (asymptotic series past x = 37).
double log_survival(double x);
/// log Phi(x) = log_survival(-x).
double log_cdf(double x);

}  // namespace gaussian

}  // namespace binutil
