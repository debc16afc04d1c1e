#include "binutil/cli_report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "binutil/binomial_core.hpp"
#include "binutil/martingale.hpp"
#include "binutil/parallel.hpp"
#include "binutil/tail_bounds.hpp"
#include "binutil/utility.hpp"
#include "binutil/value_functions.hpp"

namespace binutil {
namespace {

// Streaming JSON with fixed key order and 17-digit numbers.
class JsonWriter {
 public:
  JsonWriter& open_object() { return open('{'); }
  JsonWriter& close_object() { return close('}'); }
  JsonWriter& open_array() { return open('['); }
  JsonWriter& close_array() { return close(']'); }

  JsonWriter& key(std::string_view k) {
    separate();
    quote(k);
    out_ += ": ";
    after_key_ = true;
    return *this;
  }
  JsonWriter& number(double v) {
    separate();
    out_ += std::isfinite(v) ? format_number(v) : "null";
    return *this;
  }
  JsonWriter& integer(std::int64_t v) {
    separate();
    out_ += std::to_string(v);
    return *this;
  }
  JsonWriter& boolean(bool v) {
    separate();
    out_ += v ? "true" : "false";
    return *this;
  }
  JsonWriter& string(std::string_view v) {
    separate();
    quote(v);
    return *this;
  }
  JsonWriter& null() {
    separate();
    out_ += "null";
    return *this;
  }
  template <class T>
  JsonWriter& optional(const std::optional<T>& v) {
    if (!v) return null();
    if constexpr (std::is_same_v<T, bool>) {
      return boolean(*v);
    } else if constexpr (std::is_integral_v<T>) {
      return integer(*v);
    } else {
      return number(*v);
    }
  }
  JsonWriter& numbers(const std::vector<double>& vs) {
    open_array();
    for (double v : vs) number(v);
    return close_array();
  }

  std::string finish() { return out_ + "\n"; }

 private:
  JsonWriter& open(char c) {
    separate();
    out_ += c;
    counts_.push_back(0);
    return *this;
  }
  JsonWriter& close(char c) {
    const int count = counts_.back();
    counts_.pop_back();
    if (count > 0) newline();
    out_ += c;
    return *this;
  }
  void separate() {
    if (after_key_) {
      after_key_ = false;
      return;
    }
    if (counts_.empty()) return;
    if (counts_.back()++ > 0) out_ += ',';
    newline();
  }
  void newline() {
    out_ += '\n';
    out_.append(2 * counts_.size(), ' ');
  }
  void quote(std::string_view s) {
    out_ += '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        case '\r': out_ += "\\r"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            out_ += fmt::format("\\u{:04x}", static_cast<int>(c));
          } else {
            out_ += c;
          }
      }
    }
    out_ += '"';
  }

  std::string out_;
  std::vector<int> counts_;
  bool after_key_ = false;
};

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row(header); }
  void row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw std::logic_error("csv row width mismatch");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out_ += ',';
      out_ += csv_field(fields[i]);
    }
    out_ += '\n';
  }
  const std::string& str() const { return out_; }

 private:
  std::size_t columns_;
  std::string out_;
};

std::string num(double v) { return format_number(v); }
std::string num(std::int64_t v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "true" : "false"; }
template <class T>
std::string opt(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_same_v<T, bool>) {
    return flag(*v);
  } else {
    return num(*v);
  }
}

// Short form for file names: 0.5 -> "0.5", 1e-3 -> "0.001".
std::string label(double v) { return fmt::format("{}", v); }

struct Context {
  const RunConfig& config;
  std::string hash;
  std::filesystem::path dir;
  std::ostream& out;
  std::ostream& err;

  bool csv() const { return config.format != OutputFormat::kJson; }
  bool json() const { return config.format != OutputFormat::kCsv; }

  void write(const std::string& name, const std::string& content) const {
    const auto path = dir / name;
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    file << content;
    file.close();
    if (!file) throw IoError("failed writing " + path.string());
  }

  void stamp(JsonWriter& json) const {
    json.key("config_hash").string(hash);
    json.key("artifact_version").string(kArtifactVersion);
  }
  std::vector<std::string> stamp_columns() const { return {hash, std::string(kArtifactVersion)}; }
};

std::vector<std::string> with_stamp(std::vector<std::string> header) {
  header.emplace_back("config_hash");
  header.emplace_back("artifact_version");
  return header;
}

std::vector<std::string> join(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// ---- tailcheck ----

struct TailCase {
  double p = 0.5;
  std::int64_t n = 0;
  TailBoundReport report;
  std::optional<GBoundCheck> g;
  std::optional<bool> pass;  // empty in probe mode
  std::vector<std::string> failures;
};

bool not_above(double c, double log_c, double bound, double log_bound) {
  if (std::isfinite(c) && std::isfinite(bound)) return c <= bound + 1e-9;
  return log_c <= log_bound;
}

int cmd_tailcheck(const Context& ctx) {
  const auto& cfg = ctx.config;
  std::vector<TailCase> cases;
  for (double p : cfg.p_list) {
    for (std::int64_t n : cfg.n_list) cases.push_back({p, n, {}, {}, {}, {}});
  }
  parallel_for(cases.size(), [&](std::size_t i) {
    TailCase& c = cases[i];
    const BinomialGrid grid(c.n, c.p);
    const bool regime = c.p >= 0.5;
    c.report = minimal_constant(grid, cfg.probe && !regime);
    if (regime) c.g = g_bound_check(grid);
    if (cfg.probe && !regime) return;
    const auto& r = c.report;
    if (!(r.c_right <= cfg.max_constant)) c.failures.push_back(fmt::format("c_right={} > {}", r.c_right, cfg.max_constant));
    if (!(r.c_left <= cfg.max_constant)) {
      c.failures.push_back(fmt::format("c_left={} (log {}) > {}", r.c_left, r.log_c_left, cfg.max_constant));
    }
    if (!not_above(r.c_global_right, r.log_c_global_right, r.c_right, r.log_c_right)) {
      c.failures.push_back("c_global_right exceeds c_right");
    }
    if (!not_above(r.c_global_left, r.log_c_global_left, r.c_left, r.log_c_left)) {
      c.failures.push_back("c_global_left exceeds c_left");
    }
    if (c.g && c.g->max_margin > 1e-9) {
      c.failures.push_back(fmt::format("g_n certificate margin {} at k={}", c.g->max_margin,
                                       c.g->argmax.value_or(-1)));
    }
    c.pass = c.failures.empty();
  });

  bool all_pass = true;
  CsvWriter csv(with_stamp({"n", "p", "c_right", "c_left", "argmax_right", "argmax_left",
                            "c_global_right", "c_global_left", "log_c_right", "log_c_left",
                            "log_c_global_right", "log_c_global_left", "g_max_margin",
                            "g_argmax", "probe", "pass"}));
  for (const auto& c : cases) {
    const auto& r = c.report;
    if (c.pass.has_value() && !*c.pass) all_pass = false;
    ctx.out << fmt::format("tailcheck n={} p={} c_right={:.6g} c_left={:.6g} {}\n", c.n, c.p,
                           r.c_right, r.c_left,
                           !c.pass ? "PROBE" : (*c.pass ? "PASS" : "FAIL"));
    for (const auto& f : c.failures) ctx.err << fmt::format("  n={} p={}: {}\n", c.n, c.p, f);

    if (ctx.json()) {
      JsonWriter json;
      json.open_object();
      ctx.stamp(json);
      json.key("n").integer(c.n);
      json.key("p").number(c.p);
      json.key("probe").boolean(r.probe);
      json.key("c_right").number(r.c_right);
      json.key("c_left").number(r.c_left);
      json.key("argmax_right").integer(r.argmax_right);
      json.key("argmax_left").integer(r.argmax_left);
      json.key("c_global_right").number(r.c_global_right);
      json.key("c_global_left").number(r.c_global_left);
      json.key("log_c_right").number(r.log_c_right);
      json.key("log_c_left").number(r.log_c_left);
      json.key("log_c_global_right").number(r.log_c_global_right);
      json.key("log_c_global_left").number(r.log_c_global_left);
      json.key("g_max_margin").optional(c.g ? std::optional(c.g->max_margin) : std::nullopt);
      json.key("g_argmax").optional(c.g ? c.g->argmax : std::nullopt);
      json.key("g_extreme_cell_log_ratio")
          .optional(c.g ? std::optional(c.g->extreme_cell_log_ratio) : std::nullopt);
      json.key("pass").optional(c.pass);
      json.key("failures").open_array();
      for (const auto& f : c.failures) json.string(f);
      json.close_array();
      json.close_object();
      ctx.write(fmt::format("tailcheck_n{}_p{}.json", c.n, label(c.p)), json.finish());
    }
    csv.row(join({num(c.n), num(c.p), num(r.c_right), num(r.c_left), num(r.argmax_right),
                  num(r.argmax_left), num(r.c_global_right), num(r.c_global_left),
                  num(r.log_c_right), num(r.log_c_left), num(r.log_c_global_right),
                  num(r.log_c_global_left),
                  c.g ? num(c.g->max_margin) : std::string(), c.g ? opt(c.g->argmax) : std::string(),
                  flag(r.probe), opt(c.pass)},
                 ctx.stamp_columns()));
  }
  if (ctx.csv()) ctx.write("tailcheck.csv", csv.str());
  return all_pass ? kExitOk : kExitNumerical;
}

// ---- coeffs ----

struct CoeffCase {
  double p = 0.5;
  std::int64_t n = 0;
  MartingaleCoefficients c;
  double residual = 0.0;
  double mass_error = 0.0;
};

int cmd_coeffs(const Context& ctx) {
  const auto& cfg = ctx.config;
  std::vector<CoeffCase> cases;
  for (double p : cfg.p_list) {
    for (std::int64_t n : cfg.n_list) cases.push_back({p, n, {}, 0.0, 0.0});
  }
  parallel_for(cases.size(), [&](std::size_t i) {
    CoeffCase& c = cases[i];
    c.c = coefficients(c.n, c.p, cfg.probe && c.p < 0.5);
    c.residual = one_step_risk_neutral_residual(c.c);
    c.mass_error = std::abs(density_on_grid(BinomialGrid(c.n, c.p), c.c).total_mass - 1.0);
  });

  bool ok = true;
  CsvWriter csv(with_stamp({"n", "p", "a", "b", "a_asym2", "b_asym2", "a_remainder",
                            "b_remainder", "a_remainder_times_n", "b_remainder_times_n2",
                            "risk_neutral_residual", "martingale_mass_error", "probe"}));
  JsonWriter json;
  json.open_object();
  ctx.stamp(json);
  json.key("rows").open_array();
  for (const auto& c : cases) {
    const auto& m = c.c;
    const double nd = static_cast<double>(m.n);
    if (!(c.residual <= 1e-12) || !(c.mass_error <= 1e-12)) {
      ok = false;
      ctx.err << fmt::format("  n={} p={}: residual {} mass error {}\n", c.n, c.p, c.residual,
                             c.mass_error);
    }
    csv.row(join({num(m.n), num(m.p), num(m.a), num(m.b), num(m.a_asym2), num(m.b_asym2),
                  num(m.a_remainder), num(m.b_remainder), num(m.a_remainder * nd),
                  num(m.b_remainder * nd * nd), num(c.residual), num(c.mass_error),
                  flag(m.probe)},
                 ctx.stamp_columns()));
    json.open_object();
    json.key("n").integer(m.n);
    json.key("p").number(m.p);
    json.key("a").number(m.a);
    json.key("b").number(m.b);
    json.key("a_asym2").number(m.a_asym2);
    json.key("b_asym2").number(m.b_asym2);
    json.key("a_remainder").number(m.a_remainder);
    json.key("b_remainder").number(m.b_remainder);
    json.key("a_remainder_times_n").number(m.a_remainder * nd);
    json.key("b_remainder_times_n2").number(m.b_remainder * nd * nd);
    json.key("risk_neutral_residual").number(c.residual);
    json.key("martingale_mass_error").number(c.mass_error);
    json.key("probe").boolean(m.probe);
    json.close_object();
  }
  json.close_array();
  json.close_object();
  if (ctx.csv()) ctx.write("coeffs.csv", csv.str());
  if (ctx.json()) ctx.write("coeffs.json", json.finish());
  ctx.out << fmt::format("coeffs {} rows {}\n", cases.size(), ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitNumerical;
}

// ---- converge ----

void write_value_point(JsonWriter& json, const ValuePoint& v) {
  json.open_object();
  json.key("argument").number(v.argument);
  json.key("value").number(v.value);
  json.key("error_estimate").number(v.error_estimate);
  json.key("finite").boolean(v.finite);
  json.key("reason").string(v.reason);
  json.key("dual_argument").optional(v.dual_argument);
  json.key("first_order_residual").optional(v.first_order_residual);
  json.close_object();
}

int cmd_converge(const Context& ctx, const Utility& utility) {
  const auto& cfg = ctx.config;
  struct Task {
    double p;
    SweepMode mode;
    double argument;
    ConvergenceTable table;
  };
  std::vector<Task> tasks;
  for (double p : cfg.p_list) {
    for (double y : cfg.y_list) tasks.push_back({p, SweepMode::kDual, y, {}});
    for (double x : cfg.x_list) tasks.push_back({p, SweepMode::kPrimal, x, {}});
  }
  // Each sweep parallelises over n internally.
  for (auto& t : tasks) {
    t.table = convergence_sweep(utility, t.p, t.argument, t.mode, cfg.n_list, cfg.tolerance);
  }

  bool all_pass = true;
  bool any_failure = false;
  for (const auto& t : tasks) {
    const auto& table = t.table;
    const bool dual = t.mode == SweepMode::kDual;
    const std::string stem = fmt::format("converge_{}_p{}_{}{}", dual ? "dual" : "primal",
                                         label(t.p), dual ? "y" : "x", label(t.argument));
    const bool pass = table.final_gap_below_tolerance;
    all_pass = all_pass && pass;
    any_failure = any_failure || !table.all_rows_ok;
    ctx.out << fmt::format("converge {} {} p={} {}={} continuous={} last_gap={:.3e} {}\n",
                           table.utility_tag, dual ? "dual" : "primal", t.p, dual ? "y" : "x",
                           t.argument, format_number(table.continuous.value),
                           table.rows.back().gap, pass ? "PASS" : "FAIL");
    for (const auto& r : table.rows) {
      if (!r.ok) ctx.err << fmt::format("  n={}: {}\n", r.n, r.status);
    }
    if (ctx.csv()) {
      CsvWriter csv(with_stamp({"n", "value", "gap", "error_estimate", "status"}));
      for (const auto& r : table.rows) {
        csv.row(join({num(r.n), num(r.value), num(r.gap), num(r.error_estimate), r.status},
                     ctx.stamp_columns()));
      }
      ctx.write(stem + ".csv", csv.str());
    }
    if (ctx.json()) {
      JsonWriter json;
      json.open_object();
      ctx.stamp(json);
      json.key("utility").string(table.utility_tag);
      json.key("p").number(table.p);
      json.key("mode").string(dual ? "dual" : "primal");
      json.key("argument").number(table.argument);
      json.key("tolerance").number(table.tolerance);
      json.key("continuous");
      write_value_point(json, table.continuous);
      json.key("rows").open_array();
      for (const auto& r : table.rows) {
        json.open_object();
        json.key("n").integer(r.n);
        json.key("value").number(r.value);
        json.key("gap").number(r.gap);
        json.key("error_estimate").number(r.error_estimate);
        json.key("ok").boolean(r.ok);
        json.key("status").string(r.status);
        json.close_object();
      }
      json.close_array();
      json.key("final_gap_below_tolerance").boolean(table.final_gap_below_tolerance);
      json.key("limsup_consistent").boolean(table.limsup_consistent);
      json.key("liminf_consistent").boolean(table.liminf_consistent);
      json.key("observed_rate").optional(table.observed_rate);
      json.key("verdict").string(pass ? "PASS" : "FAIL");
      json.close_object();
      ctx.write(stem + ".json", json.finish());
    }
  }
  return all_pass && !any_failure ? kExitOk : kExitNumerical;
}

// ---- uiprobe ----

int cmd_uiprobe(const Context& ctx, const Utility& utility) {
  const auto& cfg = ctx.config;
  const std::vector<double> ys = cfg.y_list;
  bool all_pass = true;
  for (double p : cfg.p_list) {
    const bool probe = cfg.probe && p < 0.5;
    for (double y : ys) {
      const auto report =
          uniform_integrability_probe(utility, p, y, cfg.m_list, cfg.n_list, probe);
      const std::optional<bool> pass =
          probe ? std::nullopt : std::optional(report.sups_monotone && report.dominance_holds);
      if (pass.has_value() && !*pass) all_pass = false;
      const std::string verdict = !pass ? "PROBE" : (*pass ? "PASS" : "FAIL");
      ctx.out << fmt::format("uiprobe {} p={} y={} monotone={} dominated={} {}\n",
                             report.utility_tag, p, y, report.sups_monotone,
                             report.dominance_holds, verdict);
      const std::string stem = fmt::format("uiprobe_p{}_y{}", label(p), label(y));
      if (ctx.csv()) {
        CsvWriter sups(with_stamp({"level", "sup_right_tail", "sup_left_tail", "argsup_right",
                                   "argsup_left", "log_gaussian_right", "log_gaussian_left"}));
        for (const auto& l : report.levels) {
          sups.row(join({num(l.level), num(l.sup_right_tail), num(l.sup_left_tail),
                         num(l.argsup_right), num(l.argsup_left), num(l.log_gaussian_right),
                         num(l.log_gaussian_left)},
                        ctx.stamp_columns()));
        }
        ctx.write(stem + "_sup.csv", sups.str());
        CsvWriter cells(with_stamp({"n", "level", "right_tail", "left_tail", "log_right_tail",
                                    "log_left_tail", "right_dominated", "left_dominated"}));
        for (const auto& c : report.cells) {
          cells.row(join({num(c.n), num(c.level), num(c.right_tail), num(c.left_tail),
                          num(c.log_right_tail), num(c.log_left_tail), opt(c.right_dominated),
                          opt(c.left_dominated)},
                         ctx.stamp_columns()));
        }
        ctx.write(stem + "_cells.csv", cells.str());
      }
      if (ctx.json()) {
        JsonWriter json;
        json.open_object();
        ctx.stamp(json);
        json.key("utility").string(report.utility_tag);
        json.key("p").number(report.p);
        json.key("y").number(report.y);
        json.key("probe").boolean(report.probe);
        json.key("levels").open_array();
        for (const auto& l : report.levels) {
          json.open_object();
          json.key("level").number(l.level);
          json.key("sup_right_tail").number(l.sup_right_tail);
          json.key("sup_left_tail").number(l.sup_left_tail);
          json.key("argsup_right").integer(l.argsup_right);
          json.key("argsup_left").integer(l.argsup_left);
          json.key("log_gaussian_right").number(l.log_gaussian_right);
          json.key("log_gaussian_left").number(l.log_gaussian_left);
          json.close_object();
        }
        json.close_array();
        json.key("cells").open_array();
        for (const auto& c : report.cells) {
          json.open_object();
          json.key("n").integer(c.n);
          json.key("level").number(c.level);
          json.key("right_tail").number(c.right_tail);
          json.key("left_tail").number(c.left_tail);
          json.key("log_right_tail").number(c.log_right_tail);
          json.key("log_left_tail").number(c.log_left_tail);
          json.key("right_dominated").optional(c.right_dominated);
          json.key("left_dominated").optional(c.left_dominated);
          json.close_object();
        }
        json.close_array();
        json.key("sups_monotone").boolean(report.sups_monotone);
        json.key("dominance_holds").boolean(report.dominance_holds);
        json.key("verdict").string(verdict);
        json.close_object();
        ctx.write(stem + ".json", json.finish());
      }
    }
  }
  return all_pass ? kExitOk : kExitNumerical;
}

std::int64_t parse_integer(std::string_view s) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("'{}' is not an integer", s));
  return v;
}

std::int64_t parse_n_atom(std::string_view s) {
  if (s.size() > 2 && s[0] == '2' && s[1] == '^') {
    const std::int64_t e = parse_integer(s.substr(2));
    if (e < 0 || e > 40) throw ConfigError(fmt::format("exponent out of range in '{}'", s));
    return std::int64_t{1} << e;
  }
  return parse_integer(s);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(trim(text.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <class T>
void require_unique_sorted(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

void run_one(Subcommand s, const Context& ctx, const std::optional<Utility>& utility, int& code) {
  int rc = kExitOk;
  switch (s) {
    case Subcommand::kTailcheck: rc = cmd_tailcheck(ctx); break;
    case Subcommand::kCoeffs: rc = cmd_coeffs(ctx); break;
    case Subcommand::kConverge: rc = cmd_converge(ctx, *utility); break;
    case Subcommand::kUiprobe: rc = cmd_uiprobe(ctx, *utility); break;
    case Subcommand::kReport: break;
  }
  code = std::max(code, rc);
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

std::string_view to_string(Subcommand s) {
  switch (s) {
    case Subcommand::kTailcheck: return "tailcheck";
    case Subcommand::kCoeffs: return "coeffs";
    case Subcommand::kConverge: return "converge";
    case Subcommand::kUiprobe: return "uiprobe";
    case Subcommand::kReport: return "report";
  }
  return "report";
}

std::string_view to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::kCsv: return "csv";
    case OutputFormat::kJson: return "json";
    case OutputFormat::kBoth: return "both";
  }
  return "both";
}

Subcommand parse_subcommand(std::string_view s) {
  for (auto c : {Subcommand::kTailcheck, Subcommand::kCoeffs, Subcommand::kConverge,
                 Subcommand::kUiprobe, Subcommand::kReport}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError(fmt::format("unknown subcommand '{}'", s));
}

OutputFormat parse_format(std::string_view s) {
  for (auto f : {OutputFormat::kCsv, OutputFormat::kJson, OutputFormat::kBoth}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError(fmt::format("unknown format '{}' (csv, json or both)", s));
}

std::vector<std::int64_t> parse_n_list(std::string_view text) {
  std::vector<std::int64_t> out;
  for (std::string_view part : split(text, ',')) {
    if (part.empty()) throw ConfigError(fmt::format("empty entry in n list '{}'", text));
    const std::size_t dots = part.find("..");
    if (dots == std::string_view::npos) {
      out.push_back(parse_n_atom(part));
      continue;
    }
    const std::string_view lo_text = trim(part.substr(0, dots));
    const std::string_view hi_text = trim(part.substr(dots + 2));
    const std::int64_t lo = parse_n_atom(lo_text);
    const std::int64_t hi = parse_n_atom(hi_text);
    if (hi < lo) throw ConfigError(fmt::format("empty range '{}'", part));
    const bool doubling = lo_text.starts_with("2^") && hi_text.starts_with("2^");
    if (!doubling && hi - lo > 1'000'000) {
      throw ConfigError(fmt::format("range '{}' has too many entries", part));
    }
    for (std::int64_t n = lo; n <= hi; n = doubling ? 2 * n : n + 1) out.push_back(n);
  }
  require_unique_sorted(out);
  for (std::int64_t n : out) {
    if (n < 1 || n > kMaxGridSteps) {
      throw ConfigError(fmt::format("n={} outside [1, {}]", n, kMaxGridSteps));
    }
  }
  return out;
}

std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  for (std::string_view part : split(text, ',')) {
    double v = 0.0;
    const auto* end = part.data() + part.size();
    const auto [ptr, ec] = std::from_chars(part.data(), end, v);
    if (part.empty() || ec != std::errc() || ptr != end) {
      throw ConfigError(fmt::format("'{}' is not a number", part));
    }
    out.push_back(v);
  }
  return out;
}

void validate(const RunConfig& config) {
  if (config.p_list.empty()) throw ConfigError("no p given");
  if (config.n_list.empty()) throw ConfigError("no n given (use --n, e.g. --n 2^6..2^12)");
  const bool needs_regime = config.subcommand == Subcommand::kConverge ||
                            config.subcommand == Subcommand::kReport;
  for (double p : config.p_list) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError(fmt::format("p={} outside (0, 1)", p));
    if (p < 0.5 && (!config.probe || needs_regime)) {
      throw ConfigError(fmt::format(
          "p={} < 1/2 is outside the supported regime (tailcheck, coeffs and uiprobe accept it "
          "with --probe)",
          p));
    }
  }
  for (std::int64_t n : config.n_list) {
    if (n < 1 || n > kMaxGridSteps) throw ConfigError(fmt::format("n={} out of range", n));
  }
  for (double y : config.y_list) {
    if (!(y > 0.0) || !std::isfinite(y)) throw ConfigError(fmt::format("y={} must be positive", y));
  }
  for (double x : config.x_list) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(fmt::format("x={} must be positive", x));
  }
  for (double m : config.m_list) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw ConfigError(fmt::format("M={} must be >= 0", m));
  }
  if (!(config.tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
  if (!(config.max_constant > 0.0)) throw ConfigError("max constant must be positive");
  if (config.out_dir.empty()) throw ConfigError("output directory must not be empty");
}

std::string to_json(const RunConfig& config) {
  JsonWriter json;
  json.open_object();
  json.key("subcommand").string(to_string(config.subcommand));
  json.key("p").numbers(config.p_list);
  json.key("n").open_array();
  for (std::int64_t n : config.n_list) json.integer(n);
  json.close_array();
  json.key("utility").string(config.utility);
  json.key("y").numbers(config.y_list);
  json.key("x").numbers(config.x_list);
  json.key("m").numbers(config.m_list);
  json.key("tol").number(config.tolerance);
  json.key("max_constant").number(config.max_constant);
  json.key("out").string(config.out_dir);
  json.key("format").string(to_string(config.format));
  json.key("probe").boolean(config.probe);
  json.close_object();
  return json.finish();
}

RunConfig config_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunConfig c;
    c.subcommand = parse_subcommand(j.at("subcommand").get<std::string>());
    c.p_list = j.at("p").get<std::vector<double>>();
    c.n_list = j.at("n").get<std::vector<std::int64_t>>();
    c.utility = j.at("utility").get<std::string>();
    c.y_list = j.at("y").get<std::vector<double>>();
    c.x_list = j.at("x").get<std::vector<double>>();
    c.m_list = j.at("m").get<std::vector<double>>();
    c.tolerance = j.at("tol").get<double>();
    c.max_constant = j.at("max_constant").get<double>();
    c.out_dir = j.at("out").get<std::string>();
    c.format = parse_format(j.at("format").get<std::string>());
    c.probe = j.at("probe").get<bool>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config JSON: ") + e.what());
  }
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json(config)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  validate(config);
  std::optional<Utility> utility;
  const bool needs_utility = config.subcommand == Subcommand::kConverge ||
                             config.subcommand == Subcommand::kUiprobe ||
                             config.subcommand == Subcommand::kReport;
  if (needs_utility) {
    try {
      utility = Utility::parse(config.utility);
    } catch (const InvalidSpecError& e) {
      throw ConfigError(e.what());
    }
  }

  const std::filesystem::path dir(config.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
  }
  const std::string hash = config_hash(config);
  const Context ctx{config, hash, dir, out, err};

  int code = kExitOk;
  if (config.subcommand == Subcommand::kReport) {
    for (auto s : {Subcommand::kTailcheck, Subcommand::kCoeffs, Subcommand::kConverge,
                   Subcommand::kUiprobe}) {
      run_one(s, ctx, utility, code);
    }
  } else {
    run_one(config.subcommand, ctx, utility, code);
  }

  JsonWriter json;
  json.open_object();
  ctx.stamp(json);
  json.key("exit_code").integer(code);
  json.key("config").string(to_json(config));
  json.close_object();
  ctx.write(fmt::format("run_{}.json", to_string(config.subcommand)), json.finish());
  return code;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Binomial-to-Gaussian utility maximization checks", "binutil"};
  app.require_subcommand(1);
  std::string p_text = "0.5";
  std::string n_text;
  std::string y_text;
  std::string x_text;
  std::string m_text;
  std::string format_text = "both";
  RunConfig config;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--p", p_text, "comma-separated up-probabilities (default 0.5)");
    sub->add_option("--n", n_text, "steps: 2^a..2^b, lo..hi or comma list")->required();
    sub->add_option("--utility", config.utility, "log | power:<gamma> | table:<csv path>");
    sub->add_option("--y", y_text, "comma-separated dual arguments");
    sub->add_option("--x", x_text, "comma-separated primal arguments");
    sub->add_option("--m", m_text, "comma-separated tail levels M for uiprobe");
    sub->add_option("--tol", config.tolerance, "convergence tolerance (default 1e-3)");
    sub->add_option("--cmax", config.max_constant, "tailcheck bound on local constants (default 10)");
    sub->add_option("--out", config.out_dir, "output directory (default out)");
    sub->add_option("--format", format_text, "csv | json | both");
    sub->add_flag("--probe", config.probe, "allow p < 1/2; results are flagged, never gated");
  };
  std::map<CLI::App*, Subcommand> subs;
  subs[app.add_subcommand("tailcheck", "Gaussian dominance constants per (n, p)")] = Subcommand::kTailcheck;
  subs[app.add_subcommand("coeffs", "martingale-measure coefficients a_n, b_n")] = Subcommand::kCoeffs;
  subs[app.add_subcommand("converge", "v_n -> v and u_n -> u sweeps")] = Subcommand::kConverge;
  subs[app.add_subcommand("uiprobe", "uniform integrability tail sums")] = Subcommand::kUiprobe;
  subs[app.add_subcommand("report", "all of the above with one config")] = Subcommand::kReport;
  for (auto& [sub, kind] : subs) add_common(sub);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    for (auto& [sub, kind] : subs) {
      if (sub->parsed()) config.subcommand = kind;
    }
    config.p_list = parse_real_list(p_text);
    config.n_list = parse_n_list(n_text);
    if (!y_text.empty()) config.y_list = parse_real_list(y_text);
    if (!x_text.empty()) config.x_list = parse_real_list(x_text);
    if (!m_text.empty()) config.m_list = parse_real_list(m_text);
    config.format = parse_format(format_text);
    const bool converge = config.subcommand == Subcommand::kConverge ||
                          config.subcommand == Subcommand::kReport;
    if (converge && config.y_list.empty() && config.x_list.empty()) {
      config.y_list = {1.0};
      config.x_list = {1.0};
    }
    if (config.y_list.empty() && config.subcommand == Subcommand::kUiprobe) config.y_list = {1.0};
    return run(config, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace binutil
