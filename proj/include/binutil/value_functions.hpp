#pragma once

// Dual and primal value functions of the continuous (Gaussian) model and of
// the n-step binomial approximation:
//   v(y)   = E_P[V(y Z)],      Z   = exp(-w/2 - 1/8),  w ~ N(0, 1)
//   v_n(y) = E_Pn[V(y Z_n)],   Z_n = exp(-a_n w - b_n), w ~ standardized binomial
//   u(x)   = inf_y { v(y) + x y }, and likewise u_n from v_n.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "binutil/binomial_core.hpp"
#include "binutil/martingale.hpp"
#include "binutil/tail_bounds.hpp"
#include "binutil/utility.hpp"

namespace binutil {

struct ValuePoint {
  double argument = 0.0;
  double value = 0.0;
  double error_estimate = 0.0;
  std::optional<std::int64_t> n;  // absent for the continuous model
  bool finite = true;
  std::string reason;  // why the value is +inf or could not be evaluated
  // Primal points only: the minimising dual argument and |v'(y*) + x|.
  std::optional<double> dual_argument;
  std::optional<double> first_order_residual;
};

/// A pricing model seen through its dual: a law for w and a density Z(w).
class DualModel {
 public:
  virtual ~DualModel() = default;
  /// v(y); +inf (finite = false) when the expectation diverges.
  virtual ValuePoint value(const Utility& utility, double y) const = 0;
  /// v'(y) = E[Z V'(y Z)] = -E[Z I(y Z)].
  virtual ValuePoint slope(const Utility& utility, double y) const = 0;
  virtual std::optional<std::int64_t> steps() const = 0;
};

/// The Black-Scholes-Merton terminal law with its martingale density.
///
/// Expectations are adaptive Gauss-Kronrod integrals over [-L, L] where L is
/// the smallest value >= 8 with |integrand(+-L)| < 1e-16; integrands that do
/// not decay by |x| = 64 are reported as divergent.
class ContinuousModel final : public DualModel {
 public:
  ValuePoint value(const Utility& utility, double y) const override;
  ValuePoint slope(const Utility& utility, double y) const override;
  std::optional<std::int64_t> steps() const override { return std::nullopt; }

  /// Same integral with a caller-chosen half-width (for truncation checks).
  ValuePoint value_on(const Utility& utility, double y, double half_width) const;
  /// Half-width the automatic rule picks for v(y), or nullopt if divergent.
  std::optional<double> truncation_half_width(const Utility& utility, double y) const;
};

enum class SummationOrder { kAscending, kDescending };

/// The n-step binomial model: a finite sum over the grid atoms.
class DiscreteModel final : public DualModel {
 public:
  /// Throws std::invalid_argument if grid and coefficients disagree on (n, p).
  DiscreteModel(const BinomialGrid& grid, MartingaleCoefficients coeffs,
                SummationOrder order = SummationOrder::kAscending);

  ValuePoint value(const Utility& utility, double y) const override;
  ValuePoint slope(const Utility& utility, double y) const override;
  std::optional<std::int64_t> steps() const override { return grid_->n(); }

  const BinomialGrid& grid() const { return *grid_; }
  const MartingaleCoefficients& coefficients() const { return coeffs_; }

 private:
  const BinomialGrid* grid_;
  MartingaleCoefficients coeffs_;
  SummationOrder order_;
};

/// v(y) for the continuous model.
ValuePoint v_continuous(const Utility& utility, double y);
/// v_n(y) = sum_k V(y exp(-a z_k - b)) f_k.
ValuePoint v_discrete(const Utility& utility, const BinomialGrid& grid,
                      const MartingaleCoefficients& coeffs, double y,
                      SummationOrder order = SummationOrder::kAscending);

/// u(x) = inf_{y>0} { v(y) + x y }, found by bracketed root finding on
/// v'(y) + x in log y over [1e-12, 1e12]. Throws std::runtime_error when no
/// sign change of v'(y) + x exists in that bracket.
ValuePoint u_from_v(const Utility& utility, const DualModel& model, double x);

/// Smallest y (to relative 1e-6) in [y_lo, y_hi] at which v is finite, found by
/// bisection in log y. Returns y_lo if v(y_lo) is finite and nullopt if v(y_hi)
/// is not.
std::optional<double> finiteness_threshold(const Utility& utility, double y_lo, double y_hi);

enum class SweepMode { kPrimal, kDual };

struct ConvergenceRow {
  std::int64_t n = 0;
  double value = 0.0;
  double gap = 0.0;  // value - continuous value
  double error_estimate = 0.0;
  bool ok = true;
  std::string status = "ok";
};

struct ConvergenceTable {
  double p = 0.5;
  std::string utility_tag;
  SweepMode mode = SweepMode::kDual;
  double argument = 1.0;
  double tolerance = 1e-3;
  ValuePoint continuous;
  std::vector<ConvergenceRow> rows;  // ascending n
  /// |gap| of the last row strictly below the tolerance.
  bool final_gap_below_tolerance = false;
  /// Over the upper half of the rows: value <= continuous + tol, and
  /// value >= continuous - tol.
  bool limsup_consistent = false;
  bool liminf_consistent = false;
  /// Least-squares slope of log|gap| against log n over the upper half of the
  /// rows, negated; recorded only, never asserted.
  std::optional<double> observed_rate;
  bool all_rows_ok = true;
};

/// Throws std::domain_error for p outside [1/2, 1) and std::invalid_argument
/// if n_list is empty or not ascending.
ConvergenceTable convergence_sweep(const Utility& utility, double p, double argument,
                                   SweepMode mode, const std::vector<std::int64_t>& n_list,
                                   double tolerance = 1e-3);

/// Tail expectations of H(w) = V(y exp(-w/2 - 1/8)) under the binomial laws.
struct UniformIntegrabilityCell {
  std::int64_t n = 0;
  double level = 0.0;  // M
  double right_tail = 0.0;  // sum_k H(z_k) 1{H(z_k) > M} f_k
  double left_tail = 0.0;   // sum_k |H(z_k)| 1{H(z_k) < -M} f_k
  double log_right_tail = 0.0;
  double log_left_tail = 0.0;
  /// Dominance against c * (Gaussian integral over the same level set), with
  /// c the local minimal constant of this (n, p). Checked in log space; empty
  /// when the level set does not lie on one side of zero.
  std::optional<bool> right_dominated;
  std::optional<bool> left_dominated;
};

struct UniformIntegrabilityLevel {
  double level = 0.0;
  double sup_right_tail = 0.0;
  double sup_left_tail = 0.0;
  std::int64_t argsup_right = 0;
  std::int64_t argsup_left = 0;
  /// log of the Gaussian integrals of H 1{H > M} and |H| 1{H < -M}.
  double log_gaussian_right = 0.0;
  double log_gaussian_left = 0.0;
};

struct UniformIntegrabilityReport {
  double p = 0.5;
  double y = 1.0;
  std::string utility_tag;
  bool probe = false;
  std::vector<UniformIntegrabilityLevel> levels;   // in the order of M_list
  std::vector<UniformIntegrabilityCell> cells;     // n-major, then M
  /// Sups non-increasing in M (for ascending M).
  bool sups_monotone = false;
  /// Every applicable dominance check passed.
  bool dominance_holds = false;
};

UniformIntegrabilityReport uniform_integrability_probe(const Utility& utility, double p, double y,
                                                       const std::vector<double>& levels,
                                                       const std::vector<std::int64_t>& n_list,
                                                       bool probe = false);

/// log of the integral of |H| phi over [a, inf) (right) or (-inf, a] (left),
/// with phi factored out at a so that far tails stay representable.
double log_gaussian_tail_integral(const Utility& utility, double y, double a, TailSide side);

/// sup_x |F_n(x) - Phi(x)|, including left limits at the atoms.
double kolmogorov_distance(const BinomialGrid& grid);

}  // namespace binutil
