#include "binutil/binomial_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "binutil/summation.hpp"

namespace binutil {
namespace {

constexpr double kLogSqrtTwoPi = 0.91893853320467274178;
constexpr double kLogTwoPi = 1.83787706640934548356;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Stirling remainder at x = i/2, i = 0..30.
constexpr std::array<double, 31> kRemainderHalves = {
    0.0,  // unused
    0.1534264097200273452914,   0.08106146679532725821967,
    0.05481412105191765389614,  0.04134069595540929409382,
    0.03316287351993628748511,  0.02767792568499833914879,
    0.02374616365629749597133,  0.02079067210376509311152,
    0.01848845053267318523078,  0.01664469118982119216319,
    0.01513497322191737887351,  0.01387612882307074799875,
    0.01281046524292022692425,  0.01189670994589177009506,
    0.01110455975820691732663,  0.01041126526197209649748,
    0.00979941612615880329839,  0.009255462182712732917729,
    0.008768700134139385462955, 0.008330563433362871256469,
    0.00793411456431402054725,  0.007573675487951840794972,
    0.007244554301320383179546, 0.006942840107209529865664,
    0.006665247032707682442356, 0.00640899418800420706844,
    0.006171712263039457647535, 0.005951370112758847735624,
    0.005746216513010115682026, 0.005554733551962801371039,
};

// Deviance term x log(x/m) + m - x, evaluated by series when x is close to m.
double deviance(double x, double m) {
  if (std::abs(x - m) < 0.1 * (x + m)) {
    const double v = (x - m) / (x + m);
    double s = (x - m) * v;
    double ej = 2.0 * x * v;
    const double v2 = v * v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v2;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
    return s;
  }
  return x * std::log(x / m) + m - x;
}

void check_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("probability must lie in (0, 1), got " + std::to_string(p));
  }
}

}  // namespace

double stirling_remainder(double x) {
  if (!(x > 0.0)) throw std::domain_error("stirling_remainder requires x > 0");
  if (x <= 15.0) {
    const double twice = 2.0 * x;
    if (twice == std::floor(twice)) return kRemainderHalves[static_cast<std::size_t>(twice)];
    return std::lgamma(x + 1.0) - (x + 0.5) * std::log(x) + x - kLogSqrtTwoPi;
  }
  constexpr double s0 = 1.0 / 12.0;
  constexpr double s1 = 1.0 / 360.0;
  constexpr double s2 = 1.0 / 1260.0;
  constexpr double s3 = 1.0 / 1680.0;
  constexpr double s4 = 1.0 / 1188.0;
  const double xx = x * x;
  if (x > 500.0) return (s0 - s1 / xx) / x;
  if (x > 80.0) return (s0 - (s1 - s2 / xx) / xx) / x;
  if (x > 35.0) return (s0 - (s1 - (s2 - s3 / xx) / xx) / xx) / x;
  return (s0 - (s1 - (s2 - (s3 - s4 / xx) / xx) / xx) / xx) / x;
}

double stirling_theta(double x) {
  if (!(x > 0.0)) throw std::domain_error("stirling_theta requires x > 0");
  return 12.0 * x * stirling_remainder(x);
}

double log_pmf(std::int64_t n, double p, std::int64_t k) {
  if (n < 1) throw std::domain_error("log_pmf requires n >= 1");
  check_probability(p);
  if (k < 0 || k > n) {
    throw std::domain_error("log_pmf: k=" + std::to_string(k) + " outside [0, " +
                            std::to_string(n) + "]");
  }
  const double nd = static_cast<double>(n);
  if (k == 0) return nd * std::log1p(-p);
  if (k == n) return nd * std::log(p);
  const double kd = static_cast<double>(k);
  const double md = static_cast<double>(n - k);
  const double q = 1.0 - p;
  const double lc = stirling_remainder(nd) - stirling_remainder(kd) - stirling_remainder(md) -
                    deviance(kd, nd * p) - deviance(md, nd * q);
  const double lf = kLogTwoPi + std::log(kd) + std::log1p(-kd / nd);
  return lc - 0.5 * lf;
}

BinomialGrid::BinomialGrid(std::int64_t n, double p) : n_(n), p_(p) {
  if (n < 1 || n > kMaxGridSteps) {
    throw std::domain_error("grid size n=" + std::to_string(n) + " outside [1, " +
                            std::to_string(kMaxGridSteps) + "]");
  }
  check_probability(p);
  const double nd = static_cast<double>(n);
  mean_steps_ = nd * p;
  dz_ = 1.0 / std::sqrt(nd * p * (1.0 - p));
  const auto size = static_cast<std::size_t>(n) + 1;
  z_.resize(size);
  log_f_.resize(size);
  for (std::int64_t k = 0; k <= n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    z_[i] = lattice_point(k);
    log_f_[i] = log_pmf(n, p, k);
  }
}

double BinomialGrid::f(std::int64_t k) const { return std::exp(log_f(k)); }

double BinomialGrid::lattice_point(std::int64_t k) const {
  return (static_cast<double>(k) - mean_steps_) * dz_;
}

std::int64_t BinomialGrid::last_index_at_or_below(double x) const {
  if (std::isnan(x)) throw std::domain_error("cdf argument is NaN");
  if (x < z_.front()) return -1;
  if (x >= z_.back()) return n_;
  // Estimate from the lattice formula, then settle against the stored points
  // so that the answer agrees with the comparison z_k <= x exactly.
  auto k = static_cast<std::int64_t>(std::floor(x / dz_ + mean_steps_));
  k = std::clamp<std::int64_t>(k, 0, n_);
  while (k < n_ && z(k + 1) <= x) ++k;
  while (k >= 0 && z(k) > x) --k;
  return k;
}

BinomialGrid build_grid(std::int64_t n, double p) { return BinomialGrid(n, p); }

double cdf(const BinomialGrid& grid, double x) {
  const std::int64_t last = grid.last_index_at_or_below(x);
  CompensatedSum acc;
  for (std::int64_t k = 0; k <= last; ++k) acc.add(grid.f(k));
  return acc.value();
}

double survival(const BinomialGrid& grid, double x) {
  const std::int64_t last = grid.last_index_at_or_below(x);
  CompensatedSum acc;
  for (std::int64_t k = grid.n(); k > last; --k) acc.add(grid.f(k));
  return acc.value();
}

CumulativeTails cumulative_tails(const BinomialGrid& grid) {
  const auto size = static_cast<std::size_t>(grid.n()) + 1;
  CumulativeTails tails;
  tails.log_cdf.resize(size);
  tails.log_survival.resize(size);
  LogSumAccumulator left;
  for (std::size_t k = 0; k < size; ++k) {
    left.add_log(grid.log_f()[k]);
    tails.log_cdf[k] = left.log_value();
  }
  LogSumAccumulator right;
  for (std::size_t k = size; k-- > 0;) {
    tails.log_survival[k] = right.log_value();
    right.add_log(grid.log_f()[k]);
  }
  return tails;
}

namespace gaussian {

double pdf(double x) { return std::exp(log_pdf(x)); }

double log_pdf(double x) { return -0.5 * x * x - kLogSqrtTwoPi; }

double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double survival(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double log_survival(double x) {
  if (x <= 37.0) return std::log(survival(x));
  // Mills-ratio asymptotic series; truncation error below 1e-15 here.
  const double r = 1.0 / (x * x);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r * (1.0 - 9.0 * r))));
  return log_pdf(x) - std::log(x) + std::log(series);
}

double log_cdf(double x) { return log_survival(-x); }

}  // namespace gaussian

}  // namespace binutil
