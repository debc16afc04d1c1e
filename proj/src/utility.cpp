#include "binutil/utility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <boost/math/tools/roots.hpp>

namespace binutil {

SignedLog SignedLog::from(double v) {
  if (v == 0.0) return {};
  return {v > 0.0 ? 1.0 : -1.0, std::log(std::abs(v))};
}

struct Utility::Custom {
  Function u;
  Function marginal;
};

namespace {

void check_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::domain_error(std::string(what) + " must be positive");
}

// expm1(u)/u, equal to 1 at u = 0.
double expm1_ratio(double u) { return u == 0.0 ? 1.0 : std::expm1(u) / u; }

// Solves log U'(e^s) = log_y for s by bracket expansion and TOMS 748.
double solve_log_inverse_marginal(const Utility::Function& marginal, double log_y) {
  auto residual = [&](double s) { return std::log(marginal(std::exp(s))) - log_y; };
  constexpr double kLimit = 700.0;
  double lo = 0.0;
  double hi = 0.0;
  double f_lo = residual(0.0);
  double f_hi = f_lo;
  if (f_lo == 0.0) return 0.0;
  double step = 1.0;
  if (f_lo > 0.0) {
    // U'(1) > y: the root lies to the right.
    while (f_hi > 0.0) {
      lo = hi;
      f_lo = f_hi;
      hi = std::min(hi + step, kLimit);
      f_hi = residual(hi);
      if (hi >= kLimit && f_hi > 0.0) {
        throw std::domain_error("inverse marginal: no root below x = e^700");
      }
      step *= 2.0;
    }
  } else {
    while (f_lo < 0.0) {
      hi = lo;
      f_hi = f_lo;
      lo = std::max(lo - step, -kLimit);
      f_lo = residual(lo);
      if (lo <= -kLimit && f_lo < 0.0) {
        throw std::domain_error("inverse marginal: no root above x = e^-700");
      }
      step *= 2.0;
    }
  }
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  std::uintmax_t max_iter = 200;
  auto tolerance = [](double a, double b) {
    return std::abs(a - b) <= 1e-15 * std::max(1.0, std::min(std::abs(a), std::abs(b)));
  };
  const auto [a, b] = boost::math::tools::toms748_solve(residual, lo, hi, f_lo, f_hi, tolerance, max_iter);
  return 0.5 * (a + b);
}

}  // namespace

Utility Utility::power(double gamma) {
  if (!(gamma > 0.0) || gamma == 1.0 || !std::isfinite(gamma)) {
    throw InvalidSpecError("power utility needs gamma > 0 and gamma != 1 (use log)");
  }
  Utility out;
  out.family_ = UtilityFamily::kPower;
  out.gamma_ = gamma;
  std::ostringstream tag;
  tag << "power:" << gamma;
  out.tag_ = tag.str();
  return out;
}

Utility Utility::log() {
  Utility out;
  out.family_ = UtilityFamily::kLog;
  out.gamma_ = 1.0;
  out.tag_ = "log";
  return out;
}

Utility Utility::custom(Function u, Function marginal, std::string name) {
  if (!u || !marginal) throw InvalidSpecError("custom utility needs both U and U'");
  // U' must be finite, positive and strictly decreasing on a log grid.
  double previous = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 240; ++i) {
    const double x = std::pow(10.0, -12.0 + 0.1 * i);
    const double m = marginal(x);
    if (!std::isfinite(m) || !(m > 0.0)) {
      throw InvalidSpecError(name + ": U'(" + std::to_string(x) + ") is not finite and positive");
    }
    if (!(m < previous)) {
      throw InvalidSpecError(name + ": U' is not strictly decreasing near x = " + std::to_string(x));
    }
    previous = m;
  }
  Utility out;
  out.family_ = UtilityFamily::kCustom;
  out.tag_ = "custom:" + name;
  out.custom_ = std::make_shared<const Custom>(Custom{std::move(u), std::move(marginal)});
  return out;
}

Utility Utility::table(std::vector<TableRow> rows, std::string name) {
  if (rows.size() < 2) throw InvalidSpecError(name + ": need at least two rows");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TableRow& r = rows[i];
    if (!(r.x > 0.0) || !std::isfinite(r.x) || !std::isfinite(r.u) || !(r.marginal > 0.0) ||
        !std::isfinite(r.marginal)) {
      throw InvalidSpecError(name + ": row " + std::to_string(i) + " has x <= 0, U' <= 0 or a non-finite entry");
    }
    if (i > 0) {
      if (!(r.x > rows[i - 1].x)) throw InvalidSpecError(name + ": x must be strictly increasing");
      if (!(r.marginal < rows[i - 1].marginal)) {
        throw InvalidSpecError(name + ": U' must be strictly decreasing");
      }
      if (!(r.u > rows[i - 1].u)) throw InvalidSpecError(name + ": U must be strictly increasing");
    }
  }

  struct Segment {
    double x0;
    double log_x0;
    double m0;
    double slope;     // d log U' / d log x
    double u0;        // U at x0
  };
  std::vector<Segment> segments;
  segments.reserve(rows.size());
  // Segment i covers [x_i, x_{i+1}); the last row reuses the final slope.
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const double slope = std::log(rows[i + 1].marginal / rows[i].marginal) /
                         std::log(rows[i + 1].x / rows[i].x);
    segments.push_back({rows[i].x, std::log(rows[i].x), rows[i].marginal, slope, 0.0});
  }
  auto integral = [](const Segment& s, double log_x) {
    // int_{x0}^{x} m0 (t/x0)^slope dt
    const double l = log_x - s.log_x0;
    const double t = s.slope + 1.0;
    return s.m0 * s.x0 * l * expm1_ratio(t * l);
  };
  segments.push_back({rows.back().x, std::log(rows.back().x), rows.back().marginal,
                      segments.back().slope, 0.0});
  // Integrate outward from the row with the smallest |U| to limit cancellation.
  std::size_t anchor = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (std::abs(rows[i].u) < std::abs(rows[anchor].u)) anchor = i;
  }
  segments[anchor].u0 = rows[anchor].u;
  for (std::size_t i = anchor + 1; i < segments.size(); ++i) {
    segments[i].u0 = segments[i - 1].u0 + integral(segments[i - 1], segments[i].log_x0);
  }
  for (std::size_t i = anchor; i-- > 0;) {
    segments[i].u0 = segments[i + 1].u0 - integral(segments[i], segments[i + 1].log_x0);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double drift = std::abs(segments[i].u0 - rows[i].u);
    if (drift > 1e-3 * (1.0 + std::abs(rows[i].u))) {
      throw InvalidSpecError(name + ": U column disagrees with the integral of U' at row " +
                             std::to_string(i) + " (difference " + std::to_string(drift) + ")");
    }
  }

  auto shared = std::make_shared<const std::vector<Segment>>(std::move(segments));
  auto locate = [shared](double log_x) -> const Segment& {
    const auto& segs = *shared;
    // Last segment whose start is <= x; the first segment extrapolates left.
    auto it = std::upper_bound(segs.begin(), segs.end(), log_x,
                               [](double v, const Segment& s) { return v < s.log_x0; });
    if (it == segs.begin()) return segs.front();
    return *std::prev(it);
  };
  Function u = [locate, integral](double x) {
    const double lx = std::log(x);
    const Segment& s = locate(lx);
    return s.u0 + integral(s, lx);
  };
  Function marginal = [locate](double x) {
    const double lx = std::log(x);
    const Segment& s = locate(lx);
    return s.m0 * std::exp(s.slope * (lx - s.log_x0));
  };

  Utility out;
  out.family_ = UtilityFamily::kTable;
  out.tag_ = "table:" + name;
  out.custom_ = std::make_shared<const Custom>(Custom{std::move(u), std::move(marginal)});
  return out;
}

Utility Utility::table_from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSpecError("cannot open utility table " + path.string());
  std::vector<TableRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      if (first == std::string::npos) {
        numeric = false;
        break;
      }
      cell = cell.substr(first, last - first + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        numeric = false;
        break;
      }
      fields.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw InvalidSpecError(path.string() + ":" + std::to_string(line_no) + ": not numeric");
    }
    if (fields.size() != 3) {
      throw InvalidSpecError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 3 columns x,U,U'");
    }
    rows.push_back({fields[0], fields[1], fields[2]});
  }
  return table(std::move(rows), path.string());
}

Utility Utility::parse(std::string_view spec) {
  if (spec == "log") return log();
  if (spec.starts_with("power:")) {
    const std::string_view rest = spec.substr(6);
    double gamma = 0.0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), gamma);
    if (ec != std::errc() || ptr != rest.data() + rest.size()) {
      throw InvalidSpecError("cannot parse gamma in utility spec '" + std::string(spec) + "'");
    }
    return power(gamma);
  }
  if (spec.starts_with("table:")) return table_from_csv(std::string(spec.substr(6)));
  throw InvalidSpecError("unknown utility spec '" + std::string(spec) +
                         "' (expected power:<gamma>, log or table:<path>)");
}

double Utility::value(double x) const {
  check_positive(x, "wealth");
  switch (family_) {
    case UtilityFamily::kPower: return std::pow(x, 1.0 - gamma_) / (1.0 - gamma_);
    case UtilityFamily::kLog: return std::log(x);
    default: return custom_->u(x);
  }
}

double Utility::marginal(double x) const {
  check_positive(x, "wealth");
  switch (family_) {
    case UtilityFamily::kPower: return std::pow(x, -gamma_);
    case UtilityFamily::kLog: return 1.0 / x;
    default: return custom_->marginal(x);
  }
}

double Utility::log_inverse_marginal_at_log(double log_y) const {
  switch (family_) {
    case UtilityFamily::kPower: return -log_y / gamma_;
    case UtilityFamily::kLog: return -log_y;
    default: return solve_log_inverse_marginal(custom_->marginal, log_y);
  }
}

double Utility::inverse_marginal(double y) const {
  check_positive(y, "marginal utility level");
  switch (family_) {
    case UtilityFamily::kPower: return std::pow(y, -1.0 / gamma_);
    case UtilityFamily::kLog: return 1.0 / y;
    default: return std::exp(log_inverse_marginal_at_log(std::log(y)));
  }
}

SignedLog Utility::conjugate_at_log(double log_y) const {
  switch (family_) {
    case UtilityFamily::kPower: {
      // Stationarity gives x* = y^(-1/gamma) and V = gamma/(1-gamma) y^((gamma-1)/gamma).
      const double c = gamma_ / (1.0 - gamma_);
      return {c > 0.0 ? 1.0 : -1.0, std::log(std::abs(c)) + (gamma_ - 1.0) / gamma_ * log_y};
    }
    case UtilityFamily::kLog: return SignedLog::from(-log_y - 1.0);
    default: {
      const double log_x = solve_log_inverse_marginal(custom_->marginal, log_y);
      const double x = std::exp(log_x);
      return SignedLog::from(custom_->u(x) - std::exp(log_x + log_y));
    }
  }
}

double Utility::conjugate(double y) const {
  check_positive(y, "dual variable");
  return conjugate_at_log(std::log(y)).value();
}

}  // namespace binutil
