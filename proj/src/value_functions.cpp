#include "binutil/value_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "binutil/parallel.hpp"
#include "binutil/summation.hpp"

namespace binutil {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kLogDensityCut = -36.841361487904734;  // log 1e-16
constexpr double kMinHalfWidth = 8.0;
constexpr double kMaxHalfWidth = 64.0;
constexpr double kLogYMin = -27.631021115928547;  // log 1e-12
constexpr double kLogYMax = 27.631021115928547;

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 61>;

// A custom utility whose inverse marginal leaves the solver's range yields an
// undefined (NaN) term, which the callers report as divergence.
SignedLog conjugate_log(const Utility& utility, double log_y) {
  try {
    return utility.conjugate_at_log(log_y);
  } catch (const std::domain_error&) {
    return {1.0, std::numeric_limits<double>::quiet_NaN()};
  }
}

double inverse_marginal_log(const Utility& utility, double log_y) {
  try {
    return utility.log_inverse_marginal_at_log(log_y);
  } catch (const std::domain_error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

// Integrand of v(y) as sign * exp(log_abs): H(x) phi(x).
SignedLog value_integrand(const Utility& utility, double log_y, double x) {
  SignedLog h = conjugate_log(utility, log_y + log_density_continuous(x));
  h.log_abs += gaussian::log_pdf(x);
  return h;
}

// Integrand of v'(y): -Z I(y Z) phi.
SignedLog slope_integrand(const Utility& utility, double log_y, double x) {
  const double log_z = log_density_continuous(x);
  return {-1.0, log_z + inverse_marginal_log(utility, log_y + log_z) + gaussian::log_pdf(x)};
}

double to_linear(const SignedLog& s) {
  if (s.sign == 0.0 || s.log_abs == -kInf) return 0.0;
  return s.sign * std::exp(s.log_abs);
}

bool negligible(const SignedLog& s) {
  return s.sign == 0.0 || s.log_abs < kLogDensityCut;
}

bool defined(const SignedLog& s) {
  return !std::isnan(s.log_abs) && s.log_abs != kInf;
}

template <class Integrand>
std::optional<double> pick_half_width(const Integrand& integrand) {
  std::optional<double> picked;
  // Keep scanning out to the cap so an integrand that dips and then grows
  // again (super-Gaussian V) is caught as divergent.
  for (double L = kMinHalfWidth; L <= kMaxHalfWidth; L += 0.5) {
    const SignedLog hi = integrand(L);
    const SignedLog lo = integrand(-L);
    if (!defined(hi) || !defined(lo)) return std::nullopt;
    const bool small = negligible(hi) && negligible(lo);
    if (!small && picked) return std::nullopt;
    if (small && !picked) picked = L;
  }
  return picked;
}

template <class Integrand>
ValuePoint integrate(const Integrand& integrand, double argument, double half_width) {
  ValuePoint out;
  out.argument = argument;
  bool bad = false;
  auto f = [&](double x) {
    const SignedLog s = integrand(x);
    if (!defined(s)) {
      bad = true;
      return 0.0;
    }
    return to_linear(s);
  };
  double error = 0.0;
  double l1 = 0.0;
  const double value = Kronrod::integrate(f, -half_width, half_width, 15, 1e-14, &error, &l1);
  if (bad || !std::isfinite(value)) {
    out.value = kInf;
    out.finite = false;
    out.error_estimate = 0.0;
    out.reason = "integrand not finite on the truncated range";
    return out;
  }
  const double tail = std::abs(to_linear(integrand(half_width))) +
                      std::abs(to_linear(integrand(-half_width)));
  out.value = value;
  out.error_estimate = error + tail + 64.0 * kEps * l1;
  return out;
}

ValuePoint divergent(double argument, std::string reason) {
  ValuePoint out;
  out.argument = argument;
  out.value = kInf;
  out.finite = false;
  out.reason = std::move(reason);
  return out;
}

void require_positive(double y, const char* what) {
  if (!(y > 0.0) || !std::isfinite(y)) {
    throw std::domain_error(fmt::format("{} must be positive and finite, got {}", what, y));
  }
}

}  // namespace

std::optional<double> ContinuousModel::truncation_half_width(const Utility& utility,
                                                             double y) const {
  require_positive(y, "y");
  const double log_y = std::log(y);
  return pick_half_width([&](double x) { return value_integrand(utility, log_y, x); });
}

ValuePoint ContinuousModel::value_on(const Utility& utility, double y, double half_width) const {
  require_positive(y, "y");
  const double log_y = std::log(y);
  return integrate([&](double x) { return value_integrand(utility, log_y, x); }, y, half_width);
}

ValuePoint ContinuousModel::value(const Utility& utility, double y) const {
  const auto L = truncation_half_width(utility, y);
  if (!L) {
    return divergent(y, fmt::format("V(y Z) phi does not decay within |x| <= {}", kMaxHalfWidth));
  }
  return value_on(utility, y, *L);
}

ValuePoint ContinuousModel::slope(const Utility& utility, double y) const {
  require_positive(y, "y");
  const double log_y = std::log(y);
  auto integrand = [&](double x) { return slope_integrand(utility, log_y, x); };
  const auto L = pick_half_width(integrand);
  if (!L) {
    ValuePoint out = divergent(y, "Z I(y Z) phi does not decay");
    out.value = -kInf;
    return out;
  }
  return integrate(integrand, y, *L);
}

DiscreteModel::DiscreteModel(const BinomialGrid& grid, MartingaleCoefficients coeffs,
                             SummationOrder order)
    : grid_(&grid), coeffs_(coeffs), order_(order) {
  if (coeffs_.n != grid.n() || coeffs_.p != grid.p()) {
    throw std::invalid_argument(
        fmt::format("grid (n={}, p={}) and coefficients (n={}, p={}) disagree", grid.n(),
                    grid.p(), coeffs_.n, coeffs_.p));
  }
}

namespace {

template <class Term>
ValuePoint discrete_sum(const BinomialGrid& grid, SummationOrder order, double argument,
                        const Term& term) {
  ValuePoint out;
  out.argument = argument;
  out.n = grid.n();
  CompensatedSum sum;
  const std::int64_t n = grid.n();
  for (std::int64_t i = 0; i <= n; ++i) {
    const std::int64_t k = order == SummationOrder::kAscending ? i : n - i;
    const SignedLog t = term(k);
    const double v = to_linear(t);
    if (!defined(t) || !std::isfinite(v)) {
      out.value = kInf;
      out.finite = false;
      out.reason = fmt::format("non-finite term at k={} (z={})", k, grid.z(k));
      return out;
    }
    sum.add(v);
  }
  out.value = sum.value();
  out.error_estimate = static_cast<double>(n) * kEps * sum.abs_sum();
  return out;
}

}  // namespace

ValuePoint DiscreteModel::value(const Utility& utility, double y) const {
  require_positive(y, "y");
  const double log_y = std::log(y) - coeffs_.b;
  const double a = coeffs_.a;
  return discrete_sum(*grid_, order_, y, [&](std::int64_t k) {
    SignedLog h = conjugate_log(utility, log_y - a * grid_->z(k));
    h.log_abs += grid_->log_f(k);
    return h;
  });
}

ValuePoint DiscreteModel::slope(const Utility& utility, double y) const {
  require_positive(y, "y");
  const double log_y = std::log(y);
  const double a = coeffs_.a;
  const double b = coeffs_.b;
  return discrete_sum(*grid_, order_, y, [&](std::int64_t k) {
    const double log_z = -a * grid_->z(k) - b;
    return SignedLog{-1.0, log_z + inverse_marginal_log(utility, log_y + log_z) +
                               grid_->log_f(k)};
  });
}

ValuePoint v_continuous(const Utility& utility, double y) {
  return ContinuousModel{}.value(utility, y);
}

ValuePoint v_discrete(const Utility& utility, const BinomialGrid& grid,
                      const MartingaleCoefficients& coeffs, double y, SummationOrder order) {
  return DiscreteModel(grid, coeffs, order).value(utility, y);
}

ValuePoint u_from_v(const Utility& utility, const DualModel& model, double x) {
  require_positive(x, "x");
  // g(t) = v'(e^t) + x is increasing in t; -inf where v is infinite.
  auto g = [&](double t) {
    const ValuePoint s = model.slope(utility, std::exp(t));
    if (!s.finite || !std::isfinite(s.value)) return -kInf;
    return s.value + x;
  };

  double lo = std::clamp(-std::log(x) - 1.0, kLogYMin, kLogYMax);
  double hi = std::clamp(-std::log(x) + 1.0, kLogYMin, kLogYMax);
  if (hi <= lo) lo = hi - 1.0;
  double g_lo = g(lo);
  double g_hi = g(hi);
  for (double step = 1.0; g_lo >= 0.0 && lo > kLogYMin; step *= 2.0) {
    hi = lo;
    g_hi = g_lo;
    lo = std::max(kLogYMin, lo - step);
    g_lo = g(lo);
  }
  for (double step = 1.0; g_hi <= 0.0 && hi < kLogYMax; step *= 2.0) {
    if (std::isfinite(g_hi)) {
      lo = hi;
      g_lo = g_hi;
    }
    hi = std::min(kLogYMax, hi + step);
    g_hi = g(hi);
  }
  if (!(g_lo < 0.0) || !(g_hi > 0.0)) {
    throw std::runtime_error(
        fmt::format("no minimiser of v(y) + {} y for y in [1e-12, 1e12]", x));
  }
  // v infinite at the lower end: move lo up to the finite region.
  for (int i = 0; i < 200 && !std::isfinite(g_lo); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double g_mid = g(mid);
    if (g_mid > 0.0) {
      hi = mid;
      g_hi = g_mid;
    } else {
      lo = mid;
      g_lo = g_mid;
    }
  }

  double t_star = lo;
  if (std::isfinite(g_lo)) {
    std::uintmax_t iterations = 200;
    auto tol = [](double a, double b) {
      return std::abs(a - b) <= 4.0 * kEps * std::max(1.0, std::abs(a));
    };
    const auto bracket = boost::math::tools::toms748_solve(g, lo, hi, g_lo, g_hi, tol, iterations);
    t_star = std::abs(g(bracket.first)) <= std::abs(g(bracket.second)) ? bracket.first
                                                                        : bracket.second;
  }

  const double y_star = std::exp(t_star);
  const ValuePoint v = model.value(utility, y_star);
  const double residual = std::abs(g(t_star));
  ValuePoint out;
  out.argument = x;
  out.n = model.steps();
  out.dual_argument = y_star;
  out.first_order_residual = residual;
  if (!v.finite) {
    out.value = kInf;
    out.finite = false;
    out.reason = v.reason;
    return out;
  }
  out.value = v.value + x * y_star;
  out.error_estimate = v.error_estimate + residual * y_star + kEps * x * y_star;
  return out;
}

std::optional<double> finiteness_threshold(const Utility& utility, double y_lo, double y_hi) {
  require_positive(y_lo, "y_lo");
  require_positive(y_hi, "y_hi");
  if (y_hi < y_lo) throw std::invalid_argument("finiteness_threshold: y_hi < y_lo");
  auto finite_at = [&](double t) { return v_continuous(utility, std::exp(t)).finite; };
  double lo = std::log(y_lo);
  double hi = std::log(y_hi);
  if (finite_at(lo)) return y_lo;
  if (!finite_at(hi)) return std::nullopt;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (finite_at(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return std::exp(hi);
}

ConvergenceTable convergence_sweep(const Utility& utility, double p, double argument,
                                   SweepMode mode, const std::vector<std::int64_t>& n_list,
                                   double tolerance) {
  if (!(p >= 0.5 && p < 1.0)) {
    throw std::domain_error(fmt::format("convergence_sweep needs p in [1/2, 1), got {}", p));
  }
  if (n_list.empty()) throw std::invalid_argument("convergence_sweep: empty n list");
  if (!std::is_sorted(n_list.begin(), n_list.end()) ||
      std::adjacent_find(n_list.begin(), n_list.end()) != n_list.end()) {
    throw std::invalid_argument("convergence_sweep: n list must be strictly ascending");
  }
  require_positive(argument, "argument");

  ConvergenceTable table;
  table.p = p;
  table.utility_tag = utility.tag();
  table.mode = mode;
  table.argument = argument;
  table.tolerance = tolerance;
  const ContinuousModel continuous;
  table.continuous = mode == SweepMode::kDual ? continuous.value(utility, argument)
                                              : u_from_v(utility, continuous, argument);

  table.rows.resize(n_list.size());
  parallel_for(n_list.size(), [&](std::size_t i) {
    ConvergenceRow& row = table.rows[i];
    row.n = n_list[i];
    try {
      const BinomialGrid grid(row.n, p);
      const DiscreteModel model(grid, coefficients(row.n, p));
      const ValuePoint point = mode == SweepMode::kDual ? model.value(utility, argument)
                                                        : u_from_v(utility, model, argument);
      row.value = point.value;
      row.error_estimate = point.error_estimate;
      row.gap = point.value - table.continuous.value;
      if (!point.finite) {
        row.ok = false;
        row.status = point.reason;
      }
    } catch (const std::exception& e) {
      row.ok = false;
      row.value = std::numeric_limits<double>::quiet_NaN();
      row.gap = std::numeric_limits<double>::quiet_NaN();
      row.status = e.what();
    }
  });

  const double reference = table.continuous.value;
  table.all_rows_ok =
      table.continuous.finite &&
      std::all_of(table.rows.begin(), table.rows.end(), [](const auto& r) { return r.ok; });
  const ConvergenceRow& last = table.rows.back();
  table.final_gap_below_tolerance =
      table.continuous.finite && last.ok && std::abs(last.gap) < tolerance;

  const std::size_t start = table.rows.size() / 2;
  table.limsup_consistent = table.continuous.finite;
  table.liminf_consistent = table.continuous.finite;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int points = 0;
  for (std::size_t i = start; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    if (!r.ok) {
      table.limsup_consistent = false;
      table.liminf_consistent = false;
      continue;
    }
    if (!(r.value <= reference + tolerance)) table.limsup_consistent = false;
    if (!(r.value >= reference - tolerance)) table.liminf_consistent = false;
    if (r.gap != 0.0) {
      const double lx = std::log(static_cast<double>(r.n));
      const double ly = std::log(std::abs(r.gap));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++points;
    }
  }
  if (points >= 2) {
    const double denom = points * sxx - sx * sx;
    if (denom > 0.0) table.observed_rate = -(points * sxy - sx * sy) / denom;
  }
  return table;
}

namespace {

// sign/log form of H(x) = V(y exp(-x/2 - 1/8)).
SignedLog gain(const Utility& utility, double log_y, double x) {
  return conjugate_log(utility, log_y + log_density_continuous(x));
}

bool above(const SignedLog& h, double level) {
  return h.sign > 0.0 && h.log_abs > std::log(level);
}

bool below_negative(const SignedLog& h, double level) {
  return h.sign < 0.0 && h.log_abs > std::log(level);
}

// Boundary of a level set of the increasing function H on [-reach, reach]:
// the point where pred switches value, or +-inf when it never does.
template <class Pred>
double switch_point(const Pred& pred, double reach) {
  double lo = -reach;
  double hi = reach;
  const bool at_lo = pred(lo);
  if (at_lo == pred(hi)) return at_lo ? -kInf : kInf;
  for (int i = 0; i < 200 && hi - lo > 4.0 * kEps * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid) == at_lo) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double log_gaussian_tail_integral(const Utility& utility, double y, double a, TailSide side) {
  require_positive(y, "y");
  const double log_y = std::log(y);
  const double direction = side == TailSide::kRight ? 1.0 : -1.0;
  const SignedLog at_a = gain(utility, log_y, a);
  const double scale = at_a.sign != 0.0 && std::isfinite(at_a.log_abs) ? at_a.log_abs : 0.0;
  auto f = [&](double t) {
    const double x = a + direction * t;
    const SignedLog h = gain(utility, log_y, x);
    if (h.sign == 0.0 || !defined(h)) return 0.0;
    return std::exp(h.log_abs - scale - 0.5 * t * t - direction * a * t);
  };
  const double reach = 40.0 + std::max(0.0, -direction * a);
  const double integral = Kronrod::integrate(f, 0.0, reach, 15, 1e-12);
  if (!(integral > 0.0)) return -kInf;
  return gaussian::log_pdf(a) + scale + std::log(integral);
}

UniformIntegrabilityReport uniform_integrability_probe(const Utility& utility, double p, double y,
                                                       const std::vector<double>& levels,
                                                       const std::vector<std::int64_t>& n_list,
                                                       bool probe) {
  if (!(p > 0.0 && p < 1.0) || (!probe && p < 0.5)) {
    throw std::domain_error(
        fmt::format("uniform_integrability_probe needs p in [1/2, 1) (or probe mode), got {}", p));
  }
  require_positive(y, "y");
  for (double m : levels) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw std::invalid_argument(fmt::format("level M must be finite and >= 0, got {}", m));
    }
  }

  UniformIntegrabilityReport report;
  report.p = p;
  report.y = y;
  report.utility_tag = utility.tag();
  report.probe = probe;
  const double log_y = std::log(y);

  double reach = 80.0;
  for (std::int64_t n : n_list) {
    const double nd = static_cast<double>(n);
    reach = std::max(reach, 1.0 + std::sqrt(nd * std::max(p, 1.0 - p) / std::min(p, 1.0 - p)));
  }

  // Level sets {H > M} = (x_M, inf) and {H < -M} = (-inf, x_-M).
  std::vector<double> right_threshold(levels.size());
  std::vector<double> left_threshold(levels.size());
  report.levels.resize(levels.size());
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const double m = levels[j];
    right_threshold[j] = switch_point(
        [&](double x) { return above(gain(utility, log_y, x), m); }, reach);
    left_threshold[j] = switch_point(
        [&](double x) { return below_negative(gain(utility, log_y, x), m); }, reach);
    auto& level = report.levels[j];
    level.level = m;
    level.log_gaussian_right =
        std::isfinite(right_threshold[j])
            ? log_gaussian_tail_integral(utility, y, right_threshold[j], TailSide::kRight)
            : (right_threshold[j] > 0.0 ? -kInf : kInf);
    level.log_gaussian_left =
        std::isfinite(left_threshold[j])
            ? log_gaussian_tail_integral(utility, y, left_threshold[j], TailSide::kLeft)
            : (left_threshold[j] < 0.0 ? -kInf : kInf);
  }

  report.cells.resize(n_list.size() * levels.size());
  parallel_for(n_list.size(), [&](std::size_t i) {
    const std::int64_t n = n_list[i];
    const BinomialGrid grid(n, p);
    const TailBoundReport constants = minimal_constant(grid, probe);
    std::vector<SignedLog> h(static_cast<std::size_t>(n) + 1);
    for (std::int64_t k = 0; k <= n; ++k) h[static_cast<std::size_t>(k)] = gain(utility, log_y, grid.z(k));
    const double z_right_start = grid.z(side_begin(grid, TailSide::kRight));
    const double z_left_end = grid.z(side_end(grid, TailSide::kLeft));

    for (std::size_t j = 0; j < levels.size(); ++j) {
      const double m = levels[j];
      LogSumAccumulator right;
      LogSumAccumulator left;
      for (std::int64_t k = 0; k <= n; ++k) {
        const SignedLog& hk = h[static_cast<std::size_t>(k)];
        if (above(hk, m)) right.add_log(hk.log_abs + grid.log_f(k));
        if (below_negative(hk, m)) left.add_log(hk.log_abs + grid.log_f(k));
      }
      auto& cell = report.cells[i * levels.size() + j];
      cell.n = n;
      cell.level = m;
      cell.log_right_tail = right.log_value();
      cell.log_left_tail = left.log_value();
      cell.right_tail = std::exp(cell.log_right_tail);
      cell.left_tail = std::exp(cell.log_left_tail);

      const auto& level = report.levels[j];
      constexpr double kSlack = 1e-9;
      if (cell.log_right_tail == -kInf) {
        cell.right_dominated = true;
      } else if (right_threshold[j] >= z_right_start && m > 0.0) {
        cell.right_dominated =
            cell.log_right_tail <= constants.log_c_right + level.log_gaussian_right + kSlack;
      }
      if (cell.log_left_tail == -kInf) {
        cell.left_dominated = true;
      } else if (left_threshold[j] <= z_left_end && m > 0.0) {
        cell.left_dominated =
            cell.log_left_tail <= constants.log_c_left + level.log_gaussian_left + kSlack;
      }
    }
  });

  report.dominance_holds = true;
  for (const auto& cell : report.cells) {
    if (cell.right_dominated.has_value() && !*cell.right_dominated) report.dominance_holds = false;
    if (cell.left_dominated.has_value() && !*cell.left_dominated) report.dominance_holds = false;
  }
  for (std::size_t j = 0; j < levels.size(); ++j) {
    auto& level = report.levels[j];
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      const auto& cell = report.cells[i * levels.size() + j];
      if (i == 0 || cell.right_tail > level.sup_right_tail) {
        level.sup_right_tail = cell.right_tail;
        level.argsup_right = cell.n;
      }
      if (i == 0 || cell.left_tail > level.sup_left_tail) {
        level.sup_left_tail = cell.left_tail;
        level.argsup_left = cell.n;
      }
    }
  }
  report.sups_monotone = true;
  for (std::size_t j = 1; j < report.levels.size(); ++j) {
    const auto& prev = report.levels[j - 1];
    const auto& cur = report.levels[j];
    if (cur.level < prev.level) continue;
    if (cur.sup_right_tail > prev.sup_right_tail * (1.0 + 1e-14)) report.sups_monotone = false;
    if (cur.sup_left_tail > prev.sup_left_tail * (1.0 + 1e-14)) report.sups_monotone = false;
  }
  return report;
}

double kolmogorov_distance(const BinomialGrid& grid) {
  const CumulativeTails tails = cumulative_tails(grid);
  double worst = 0.0;
  double below = 0.0;  // F_n at the previous atom, i.e. F_n(z_k-)
  for (std::int64_t k = 0; k <= grid.n(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const double phi = gaussian::cdf(grid.z(k));
    // Take F_n from whichever tail keeps relative accuracy.
    const double at = tails.log_cdf[idx] < std::log(0.5)
                          ? std::exp(tails.log_cdf[idx])
                          : 1.0 - std::exp(tails.log_survival[idx]);
    worst = std::max({worst, std::abs(at - phi), std::abs(below - phi)});
    below = at;
  }
  return worst;
}

}  // namespace binutil
