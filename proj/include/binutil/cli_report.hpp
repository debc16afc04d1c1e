#pragma once

// Command-line front end: run configuration, report writers and the
// tailcheck / coeffs / converge / uiprobe / report subcommands.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace binutil {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitIo = 2, kExitNumerical = 3 };

/// Invalid command line or configuration (exit 1).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Output could not be written (exit 2).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Subcommand { kTailcheck, kCoeffs, kConverge, kUiprobe, kReport };
enum class OutputFormat { kCsv, kJson, kBoth };

struct RunConfig {
  Subcommand subcommand = Subcommand::kReport;
  std::vector<double> p_list;
  std::vector<std::int64_t> n_list;
  std::string utility = "log";
  std::vector<double> y_list;  // dual arguments
  std::vector<double> x_list;  // primal arguments
  std::vector<double> m_list = {1, 2, 4, 8, 16, 32, 64};
  double tolerance = 1e-3;
  double max_constant = 10.0;  // tailcheck gate on the local constants
  std::string out_dir = "out";
  OutputFormat format = OutputFormat::kBoth;
  bool probe = false;
};

std::string_view to_string(Subcommand s);
std::string_view to_string(OutputFormat f);
Subcommand parse_subcommand(std::string_view s);
OutputFormat parse_format(std::string_view s);

/// "2^a..2^b" (doubling), "lo..hi" (every integer), single values, and comma
/// separated mixtures of these. Result is sorted and de-duplicated. Throws
/// ConfigError on malformed input or n outside [1, kMaxGridSteps].
std::vector<std::int64_t> parse_n_list(std::string_view text);
/// Comma-separated reals. Throws ConfigError on malformed input.
std::vector<double> parse_real_list(std::string_view text);

/// Throws ConfigError: p outside (0, 1), p < 1/2 without probe (or at all for
/// converge), empty n list, non-positive y/x, negative tolerance or level.
void validate(const RunConfig& config);

/// Canonical JSON (fixed key order, 17 significant digits).
std::string to_json(const RunConfig& config);
/// Inverse of to_json. Throws ConfigError.
RunConfig config_from_json(std::string_view json);
/// 64-bit FNV-1a of to_json(config), as 16 lowercase hex digits.
std::string config_hash(const RunConfig& config);

/// %.17g with "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double v);

/// Runs the subcommands the config names and writes their files under
/// config.out_dir. Returns the exit code. Throws ConfigError / IoError.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full CLI: parses args (without the program name), runs, and maps
/// exceptions onto exit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace binutil
