#include "binutil/martingale.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "binutil/summation.hpp"

namespace binutil {
namespace {

using Extended = long double;

// log(sinh t / t), even in t.
Extended log_sinhc(Extended t) {
  const Extended t2 = t * t;
  if (std::abs(t) > 0.25L) return std::log(std::sinh(t) / t);
  // Taylor coefficients 2^{2k} B_{2k} / (2k (2k)!).
  constexpr Extended c[] = {
      1.0L / 6.0L,
      -1.0L / 180.0L,
      1.0L / 2835.0L,
      -1.0L / 37800.0L,
      1.0L / 467775.0L,
      -691.0L / 3831077250.0L,
      2.0L / 127702575.0L,
      -3617.0L / 2605132530000.0L,
      43867.0L / 350813659321125.0L,
  };
  Extended acc = 0.0L;
  for (int i = 8; i >= 0; --i) acc = acc * t2 + c[i];
  return acc * t2;
}

// log(expm1(x) / x) = x/2 + log(sinh(x/2) / (x/2)).
Extended log_expm1_ratio(Extended x) { return 0.5L * x + log_sinhc(0.5L * x); }

// e^x - 1 - x without cancellation.
Extended expm1_minus_linear(Extended x) {
  if (std::abs(x) > 0.5L) return std::expm1(x) - x;
  Extended term = 0.5L * x * x;
  Extended acc = term;
  for (int k = 3; k < 40; ++k) {
    term *= x / k;
    const Extended next = acc + term;
    if (next == acc) break;
    acc = next;
  }
  return acc;
}

void check_regime(std::int64_t n, double p, bool probe) {
  if (n < 1) throw std::domain_error("coefficients require n >= 1, got " + std::to_string(n));
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("coefficients require p in (0, 1), got " + std::to_string(p));
  }
  if (!probe && p < 0.5) {
    throw std::domain_error("coefficients require p in [1/2, 1) outside probe mode, got " +
                            std::to_string(p));
  }
}

}  // namespace

double down_tick(double p) { return -std::sqrt(p / (1.0 - p)); }
double up_tick(double p) { return std::sqrt((1.0 - p) / p); }

MartingaleCoefficients coefficients(std::int64_t n, double p, bool probe) {
  check_regime(n, p, probe);
  MartingaleCoefficients out;
  out.n = n;
  out.p = p;
  out.probe = p < 0.5;

  const Extended nd = static_cast<Extended>(n);
  const Extended root_n = std::sqrt(nd);
  const Extended pe = p;
  const Extended qe = 1.0L - pe;
  const Extended pq = pe * qe;

  Extended a;
  Extended b;
  if (p == 0.5) {
    // a = 1/2, b = n log cosh(t) with log cosh t = log1p(2 sinh^2(t/2)).
    const Extended t = 0.5L / root_n;
    const Extended s = std::sinh(0.5L * t);
    a = 0.5L;
    b = nd * std::log1p(2.0L * s * s);
  } else {
    const Extended z_up = std::sqrt(qe / pe);
    const Extended z_down = -std::sqrt(pe / qe);
    const Extended u = z_up / root_n;
    const Extended d = z_down / root_n;
    // log[(p/(1-p)) (e^u - 1)/(1 - e^d)]: the prefactor cancels u/(-d)
    // exactly, leaving the difference of log(expm1(x)/x) terms.
    a = root_n / (z_up - z_down) * (log_expm1_ratio(u) - log_expm1_ratio(d));
    // b = n log((1-p) e^{-a d} + p e^{-a u}); the linear parts cancel because
    // (1-p) d + p u = 0.
    const Extended inner = qe * expm1_minus_linear(-a * d) + pe * expm1_minus_linear(-a * u);
    b = nd * std::log1p(inner);
  }

  const Extended a2 = 0.5L - (2.0L * pe - 1.0L) / (24.0L * std::sqrt(pq)) / root_n;
  const Extended b2 = 0.125L - (1.0L - pe + pe * pe) / (576.0L * pq) / nd;
  out.a = static_cast<double>(a);
  out.b = static_cast<double>(b);
  out.a_asym2 = static_cast<double>(a2);
  out.b_asym2 = static_cast<double>(b2);
  out.a_remainder = static_cast<double>(a - a2);
  out.b_remainder = static_cast<double>(b - b2);
  return out;
}

double one_step_risk_neutral_residual(const MartingaleCoefficients& coeffs) {
  const Extended root_n = std::sqrt(static_cast<Extended>(coeffs.n));
  const Extended u = static_cast<Extended>(up_tick(coeffs.p)) / root_n;
  const Extended d = static_cast<Extended>(down_tick(coeffs.p)) / root_n;
  const Extended q = static_cast<Extended>(coeffs.p) *
                     std::exp(-static_cast<Extended>(coeffs.a) * u -
                              static_cast<Extended>(coeffs.b) / static_cast<Extended>(coeffs.n));
  return static_cast<double>(std::abs(q * std::expm1(u) + (1.0L - q) * std::expm1(d)));
}

double log_density_continuous(double x) { return -0.5 * x - 0.125; }

DensityEval density_on_grid(const BinomialGrid& grid, const MartingaleCoefficients& coeffs) {
  if (grid.n() != coeffs.n || grid.p() != coeffs.p) {
    throw std::invalid_argument("density_on_grid: grid (n=" + std::to_string(grid.n()) +
                                ") and coefficients (n=" + std::to_string(coeffs.n) +
                                ") describe different models");
  }
  DensityEval out;
  out.log_z.resize(grid.z().size());
  CompensatedSum mass;
  for (std::size_t k = 0; k < out.log_z.size(); ++k) {
    out.log_z[k] = -coeffs.a * grid.z()[k] - coeffs.b;
    mass.add(std::exp(out.log_z[k] + grid.log_f()[k]));
  }
  out.total_mass = mass.value();
  return out;
}

}  // namespace binutil
