#pragma once

// Utility functions on (0, inf) satisfying the Inada conditions, and their
// convex conjugates V(y) = sup_{x>0} { U(x) - x y }.

#include <cmath>
#include <filesystem>
#include <limits>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace binutil {

/// Raised when a user-supplied utility fails validation.
class InvalidSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class UtilityFamily { kPower, kLog, kCustom, kTable };

/// A real number held as sign * exp(log_abs), for values that overflow a
/// double in the far tails of large grids.
struct SignedLog {
  double sign = 0.0;  // -1, 0 or +1
  double log_abs = -std::numeric_limits<double>::infinity();

  double value() const { return sign == 0.0 ? 0.0 : sign * std::exp(log_abs); }
  static SignedLog from(double v);
};

struct TableRow {
  double x;
  double u;
  double marginal;
};

/// Immutable after construction; all evaluations are thread-safe.
class Utility {
 public:
  using Function = std::function<double(double)>;

  /// U(x) = x^(1-gamma)/(1-gamma); gamma > 0, gamma != 1.
  static Utility power(double gamma);
  /// U(x) = log x.
  static Utility log();
  /// User-supplied U and U'. U' is sampled on a log grid over [1e-12, 1e12]
  /// and must be finite, positive and strictly decreasing there.
  static Utility custom(Function u, Function marginal, std::string name = "custom");
  /// Tabulated (x, U, U') rows with strictly increasing x. U' is interpolated
  /// linearly in (log x, log U') and extrapolated with the end slopes; U is
  /// the exact integral of that interpolant anchored at the first row.
  static Utility table(std::vector<TableRow> rows, std::string name = "table");
  static Utility table_from_csv(const std::filesystem::path& path);
  /// "power:<gamma>", "log" or "table:<path>".
  static Utility parse(std::string_view spec);

  UtilityFamily family() const { return family_; }
  /// Exponent for the power family, 1 for log.
  double gamma() const { return gamma_; }
  const std::string& tag() const { return tag_; }

  double value(double x) const;
  double marginal(double x) const;
  /// x with U'(x) = y. Closed form for power and log, bracketed root finding
  /// otherwise. Throws std::domain_error for y <= 0.
  double inverse_marginal(double y) const;
  /// V(y). Throws std::domain_error for y <= 0.
  double conjugate(double y) const;
  /// V'(y) = -I(y).
  double conjugate_derivative(double y) const { return -inverse_marginal(y); }

  /// V(exp(log_y)) without forming exp(log_y) where the family allows it.
  SignedLog conjugate_at_log(double log_y) const;
  /// log I(exp(log_y)).
  double log_inverse_marginal_at_log(double log_y) const;

 private:
  struct Custom;
  Utility() = default;

  UtilityFamily family_ = UtilityFamily::kLog;
  double gamma_ = 1.0;
  std::string tag_;
  std::shared_ptr<const Custom> custom_;
};

}  // namespace binutil
