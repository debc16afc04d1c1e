#include "binutil/tail_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace binutil {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2 = std::numbers::ln2;

void check_regime(double p, bool probe) {
  if (probe) return;
  if (!(p >= 0.5 && p < 1.0)) {
    throw std::domain_error("p must lie in [1/2, 1) outside probe mode, got " + std::to_string(p));
  }
}

// Taylor expansion of alpha^{(order)} about w = p. alpha and its first two
// derivatives vanish at p, so near p the closed forms are all cancellation;
// the expansion keeps full relative accuracy there. Valid for
// |w - p| < min(p, 1 - p).
double alpha_near_p(double p, double w, int order) {
  const double q = 1.0 - p;
  const double delta = w - p;
  double sum = 0.0;
  // alpha^{(3+m)}(p) = (m+1)! [(-1)^m p^{-(m+2)} - q^{-(m+2)}]
  double inv_p_pow = 1.0 / (p * p);
  double inv_q_pow = 1.0 / (q * q);
  double sign = 1.0;
  for (int m = 0; m < 60; ++m) {
    const double bracket = sign * inv_p_pow - inv_q_pow;
    // Coefficient of delta^{m+3-order} after differentiating order times.
    const int power = m + 3 - order;
    double coeff;
    switch (order) {
      case 0: coeff = 1.0 / ((m + 2.0) * (m + 3.0)); break;
      case 1: coeff = 1.0 / (m + 2.0); break;
      default: coeff = 1.0; break;
    }
    const double delta_pow = std::pow(delta, power);
    sum += coeff * bracket * delta_pow;
    // Bound on the term rather than the term itself: at p = 1/2 every other
    // bracket is exactly zero.
    const double bound = coeff * (inv_p_pow + inv_q_pow) * std::abs(delta_pow);
    if (m > 4 && bound <= 1e-18 * std::abs(sum)) break;
    inv_p_pow /= p;
    inv_q_pow /= q;
    sign = -sign;
  }
  return sum;
}

bool use_expansion(double p, double w) {
  return std::abs(w - p) < 0.1 * std::min(p, 1.0 - p);
}

}  // namespace

std::int64_t side_begin(const BinomialGrid& grid, TailSide side) {
  if (side == TailSide::kLeft) return 0;
  return static_cast<std::int64_t>(std::floor(static_cast<double>(grid.n()) * grid.p()));
}

std::int64_t side_end(const BinomialGrid& grid, TailSide side) {
  if (side == TailSide::kRight) return grid.n();
  return std::min<std::int64_t>(
      grid.n(), static_cast<std::int64_t>(std::ceil(static_cast<double>(grid.n()) * grid.p())));
}

double log_local_ratio(const BinomialGrid& grid, std::int64_t k, TailSide side) {
  if (k < side_begin(grid, side) || k > side_end(grid, side)) {
    throw std::domain_error("k=" + std::to_string(k) + " is not admissible on the " +
                            (side == TailSide::kRight ? "right" : "left") + " side");
  }
  const std::int64_t neighbour = side == TailSide::kRight ? k + 1 : k - 1;
  return grid.log_f(k) - std::log(grid.dz()) - gaussian::log_pdf(grid.lattice_point(neighbour));
}

double local_ratio(const BinomialGrid& grid, std::int64_t k, TailSide side) {
  return std::exp(log_local_ratio(grid, k, side));
}

GlobalConstants global_tail_dominance(const BinomialGrid& grid) {
  const CumulativeTails tails = cumulative_tails(grid);
  const std::int64_t at_zero = grid.last_index_at_or_below(0.0);
  const double log_half = -kLog2;

  // x = 0 is always a candidate; then every atom on the relevant side.
  double left = (at_zero < 0 ? kNegInf : tails.log_cdf[static_cast<std::size_t>(at_zero)]) -
                log_half;
  double right = (at_zero < 0 ? 0.0 : tails.log_survival[static_cast<std::size_t>(at_zero)]) -
                 log_half;
  for (std::int64_t k = 0; k <= grid.n(); ++k) {
    const double z = grid.z(k);
    const auto i = static_cast<std::size_t>(k);
    if (z <= 0.0) left = std::max(left, tails.log_cdf[i] - gaussian::log_cdf(z));
    if (z >= 0.0 && tails.log_survival[i] > kNegInf) {
      right = std::max(right, tails.log_survival[i] - gaussian::log_survival(z));
    }
  }
  return {left, right};
}

TailBoundReport minimal_constant(const BinomialGrid& grid, bool probe) {
  check_regime(grid.p(), probe);
  TailBoundReport report;
  report.n = grid.n();
  report.p = grid.p();
  report.probe = grid.p() < 0.5;

  auto scan = [&](TailSide side, double& best, std::int64_t& arg) {
    best = kNegInf;
    arg = side_begin(grid, side);
    for (std::int64_t k = side_begin(grid, side); k <= side_end(grid, side); ++k) {
      const double r = log_local_ratio(grid, k, side);
      if (r > best) {
        best = r;
        arg = k;
      }
    }
  };
  scan(TailSide::kRight, report.log_c_right, report.argmax_right);
  scan(TailSide::kLeft, report.log_c_left, report.argmax_left);

  const GlobalConstants global = global_tail_dominance(grid);
  report.log_c_global_left = global.log_c_global_left;
  report.log_c_global_right = global.log_c_global_right;
  report.c_right = std::exp(report.log_c_right);
  report.c_left = std::exp(report.log_c_left);
  report.c_global_right = std::exp(report.log_c_global_right);
  report.c_global_left = std::exp(report.log_c_global_left);
  return report;
}

TailBoundReport minimal_constant(std::int64_t n, double p, bool probe) {
  check_regime(p, probe);
  return minimal_constant(BinomialGrid(n, p), probe);
}

BoundFunctions::BoundFunctions(double p) : p_(p) { check_regime(p, false); }

double BoundFunctions::alpha(double w) const {
  if (use_expansion(p_, w)) return alpha_near_p(p_, w, 0);
  const double entropy = -w * std::log(w) - (1.0 - w) * std::log1p(-w);
  if (symmetric()) return entropy - 2.0 * w * (1.0 - w) + 0.5 - kLog2;
  const double q = 1.0 - p_;
  return entropy + w * w / (2.0 * p_ * q) + (std::log(p_ / q) - 1.0 / q) * w + p_ / (2.0 * q) +
         std::log(q);
}

double BoundFunctions::alpha_d1(double w) const {
  if (use_expansion(p_, w)) return alpha_near_p(p_, w, 1);
  const double q = 1.0 - p_;
  if (symmetric()) return std::log((1.0 - w) / w) - 2.0 + 4.0 * w;
  return std::log((1.0 - w) / w) + w / (p_ * q) + std::log(p_ / q) - 1.0 / q;
}

double BoundFunctions::alpha_d2(double w) const {
  if (use_expansion(p_, w)) return alpha_near_p(p_, w, 2);
  return 1.0 / (p_ * (1.0 - p_)) - 1.0 / (w * (1.0 - w));
}

double BoundFunctions::alpha_d3(double w) const {
  const double v = 1.0 - w;
  return (1.0 - 2.0 * w) / (w * w * v * v);
}

double BoundFunctions::alpha_d4(double w) const {
  const double v = 1.0 - w;
  return -2.0 / (v * v * v) - 2.0 / (w * w * w);
}

double BoundFunctions::alpha_d3_at_p() const {
  const double q = p_ - 1.0;
  return (1.0 - 2.0 * p_) / (q * q * p_ * p_);
}

double BoundFunctions::beta_limit(double w) const {
  if (symmetric()) return -0.5 * std::log(w) - 0.5 * std::log1p(-w) + 4.0 * w - 2.0 - kLog2;
  const double q = 1.0 - p_;
  return -0.5 * std::log(w * (1.0 - w)) + w / (p_ * q) - kLog2 - 1.0 / q;
}

double BoundFunctions::beta(double w, std::int64_t n) const {
  const double nd = static_cast<double>(n);
  if (symmetric()) return beta_limit(w) + 25.0 / (12.0 * nd);
  const double q = 1.0 - p_;
  return beta_limit(w) + (1.0 / 12.0 + 1.0 / (2.0 * p_ * q)) / nd;
}

double BoundFunctions::beta_d1(double w) const {
  return 1.0 / (p_ * (1.0 - p_)) + 1.0 / (2.0 * (1.0 - w)) - 1.0 / (2.0 * w);
}

GBoundCheck g_bound_check(const BinomialGrid& grid) {
  const BoundFunctions bounds(grid.p());
  GBoundCheck out;
  out.n = grid.n();
  out.p = grid.p();
  out.max_margin = kNegInf;
  const double nd = static_cast<double>(grid.n());
  const std::int64_t first = side_begin(grid, TailSide::kRight) + 1;
  for (std::int64_t k = first; k <= grid.n() - 1; ++k) {
    // sqrt(np(1-p)) f_k / phi(z_{k+1}) is the right-side local ratio.
    const double margin =
        log_local_ratio(grid, k, TailSide::kRight) - bounds.g(static_cast<double>(k) / nd, grid.n());
    if (margin > out.max_margin) {
      out.max_margin = margin;
      out.argmax = k;
    }
  }
  out.extreme_cell_log_ratio = log_local_ratio(grid, grid.n(), TailSide::kRight);
  return out;
}

GBoundCheck g_bound_check(std::int64_t n, double p) {
  check_regime(p, false);
  return g_bound_check(BinomialGrid(n, p));
}

std::vector<double> chebyshev_samples(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (std::size_t i = 0; i < count; ++i) {
    const double angle = std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    out[i] = mid - half * std::cos(angle);
  }
  return out;
}

AlphaDerivativeCheck alpha_derivative_check(double p, std::size_t samples) {
  const BoundFunctions bounds(p);
  AlphaDerivativeCheck out;
  out.p = p;
  out.samples = samples;
  out.alpha_at_p = bounds.alpha(p);
  out.alpha_d1_at_p = bounds.alpha_d1(p);
  out.alpha_d2_at_p = bounds.alpha_d2(p);
  out.alpha_d3_at_p_error = std::abs(bounds.alpha_d3(p) - bounds.alpha_d3_at_p());

  const std::vector<double> ws = chebyshev_samples(p + 1e-6, 1.0 - 1e-6, samples);
  // Error measure: relative for |exact| >= 1, absolute below.
  auto rel = [](double approx, double exact) {
    return std::abs(approx - exact) / std::max(std::abs(exact), 1.0);
  };
  auto fd = [](auto&& fn, double w) {
    const double h = 0.25 * std::min({w, 1.0 - w, 0.1});
    return ridders_derivative(fn, w, h);
  };
  auto a0 = [&](double w) { return bounds.alpha(w); };
  auto a1 = [&](double w) { return bounds.alpha_d1(w); };
  auto a2 = [&](double w) { return bounds.alpha_d2(w); };
  auto a3 = [&](double w) { return bounds.alpha_d3(w); };

  const double d3p = bounds.alpha_d3(p);
  bool alpha_ok = true;
  bool beta_ok = true;
  double prev[4] = {0.0, 0.0, 0.0, 0.0};
  double prev_beta = 0.0;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const double w = ws[i];
    out.max_rel_error_d1 = std::max(out.max_rel_error_d1, rel(fd(a0, w), bounds.alpha_d1(w)));
    out.max_rel_error_d2 = std::max(out.max_rel_error_d2, rel(fd(a1, w), bounds.alpha_d2(w)));
    out.max_rel_error_d3 = std::max(out.max_rel_error_d3, rel(fd(a2, w), bounds.alpha_d3(w)));
    out.max_rel_error_d4 = std::max(out.max_rel_error_d4, rel(fd(a3, w), bounds.alpha_d4(w)));
    out.alpha_d3_variation = std::max(out.alpha_d3_variation, std::abs(bounds.alpha_d3(w) - d3p));

    const double values[4] = {bounds.alpha(w), bounds.alpha_d1(w), bounds.alpha_d2(w),
                              bounds.alpha_d3(w)};
    for (int j = 0; j < 4; ++j) {
      if (!(values[j] < 0.0)) alpha_ok = false;
      if (i > 0 && !(values[j] < prev[j])) alpha_ok = false;
      prev[j] = values[j];
    }
    // The 1/n part of beta_n is positive, so positivity of the limit covers
    // every n.
    const double b = bounds.beta_limit(w);
    if (!(b > 0.0) || !(bounds.beta_d1(w) > 0.0)) beta_ok = false;
    if (i > 0 && !(b > prev_beta)) beta_ok = false;
    prev_beta = b;
  }
  out.alpha_negative_decreasing = alpha_ok;
  out.beta_positive_increasing = beta_ok;
  return out;
}

}  // namespace binutil
