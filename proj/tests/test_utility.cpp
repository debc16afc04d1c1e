#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "binutil/utility.hpp"

using namespace binutil;

namespace {

std::vector<Utility> crra_family() {
  return {Utility::power(0.5), Utility::power(2.0), Utility::power(5.0), Utility::log()};
}

// sup_x {U(x) - x y} by golden-section search in log x (U - xy is concave in x).
double conjugate_by_search(const Utility& u, double y) {
  auto f = [&](double s) {
    const double x = std::exp(s);
    return u.value(x) - x * y;
  };
  double lo = -60.0, hi = 60.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = f(a), fb = f(b);
  for (int i = 0; i < 300; ++i) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = f(b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = f(a);
    }
  }
  return f(0.5 * (lo + hi));
}

double bisect_inverse(const Utility::Function& marginal, double y) {
  double lo = -60.0, hi = 60.0;  // in log x; marginal decreasing
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (marginal(std::exp(mid)) > y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

Utility mixed_custom() {
  // U(x) = log x + 2 sqrt x
  return Utility::custom([](double x) { return std::log(x) + 2.0 * std::sqrt(x); },
                         [](double x) { return 1.0 / x + 1.0 / std::sqrt(x); }, "log_plus_sqrt");
}

std::vector<TableRow> rows_from(const Utility& u, double lo, double hi, int count) {
  std::vector<TableRow> rows;
  for (int i = 0; i < count; ++i) {
    const double x = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    rows.push_back({x, u.value(x), u.marginal(x)});
  }
  return rows;
}

}  // namespace

TEST_SUITE("utility") {

TEST_CASE("utilities are increasing and concave on sampled grids") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> s(-10.0, 10.0);
  auto all = crra_family();
  all.push_back(mixed_custom());
  for (const auto& u : all) {
    for (int i = 0; i < 500; ++i) {
      double x1 = std::exp(s(rng)), x2 = std::exp(s(rng));
      if (x1 == x2) continue;
      if (x1 > x2) std::swap(x1, x2);
      CHECK(u.value(x2) > u.value(x1));
      CHECK(u.value(0.5 * (x1 + x2)) >= 0.5 * (u.value(x1) + u.value(x2)) - 1e-12 * std::abs(u.value(x1)));
    }
  }
}

TEST_CASE("Inada conditions on sampled wealth") {
  auto all = crra_family();
  all.push_back(mixed_custom());
  for (const auto& u : all) {
    CAPTURE(u.tag());
    CHECK(u.marginal(1e-12) >= 1e6);
    CHECK(u.marginal(1e12) < 1e-5);
  }
}

TEST_CASE("conjugate spot values") {
  CHECK(Utility::log().conjugate(1.0) == doctest::Approx(-1.0).epsilon(1e-15));
  // Grid-search oracle over x in (0, 10] for the log case.
  double best = -INFINITY;
  for (int i = 1; i <= 100000; ++i) {
    const double x = 10.0 * i / 100000.0;
    best = std::max(best, std::log(x) - x);
  }
  CHECK(best == doctest::Approx(-1.0).epsilon(1e-9));
  // gamma = 2: x* = 1 at y = 1, V = U(1) - 1 = -2.
  CHECK(Utility::power(2.0).conjugate(1.0) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(Utility::power(0.5).conjugate(1.0) == doctest::Approx(2.0 - 1.0).epsilon(1e-15));
}

TEST_CASE("conjugate matches a direct search") {
  auto all = crra_family();
  all.push_back(mixed_custom());
  for (const auto& u : all) {
    for (double y : {0.01, 0.3, 1.0, 2.5, 40.0}) {
      CAPTURE(u.tag());
      CAPTURE(y);
      const double expected = conjugate_by_search(u, y);
      CHECK(u.conjugate(y) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("Fenchel inequality with equality at the inverse marginal") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> s(-8.0, 8.0);
  auto all = crra_family();
  all.push_back(mixed_custom());
  for (const auto& u : all) {
    for (int i = 0; i < 300; ++i) {
      const double x = std::exp(s(rng)), y = std::exp(s(rng));
      const double rhs = u.conjugate(y) + x * y;
      CHECK(u.value(x) <= rhs + 1e-12 * std::max(1.0, std::abs(rhs)));
      const double xi = u.inverse_marginal(y);
      const double gap = u.conjugate(y) + xi * y - u.value(xi);
      CHECK(std::abs(gap) <= 1e-9 * std::max(1.0, std::abs(u.value(xi))));
    }
  }
}

TEST_CASE("inverse marginal") {
  CHECK(Utility::log().inverse_marginal(4.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(Utility::power(0.5).inverse_marginal(4.0) == doctest::Approx(0.0625).epsilon(1e-15));
  auto all = crra_family();
  all.push_back(mixed_custom());
  for (const auto& u : all) {
    for (double y = 1e-6; y < 1e6; y *= 3.7) {
      CHECK(std::abs(u.marginal(u.inverse_marginal(y)) - y) <= 1e-10 * y);
    }
  }
  const auto custom = mixed_custom();
  auto marginal = [](double x) { return 1.0 / x + 1.0 / std::sqrt(x); };
  for (double y : {0.05, 1.0, 7.0, 1e4}) {
    CHECK(custom.inverse_marginal(y) == doctest::Approx(bisect_inverse(marginal, y)).epsilon(1e-9));
  }
  const auto table = Utility::table(rows_from(custom, 1e-4, 1e4, 400), "mixed");
  auto table_marginal = [&](double x) { return table.marginal(x); };
  for (double y : {0.05, 1.0, 7.0, 1e4}) {
    CHECK(table.inverse_marginal(y) == doctest::Approx(bisect_inverse(table_marginal, y)).epsilon(1e-9));
  }
}

TEST_CASE("conjugate is convex and decreasing with slope -I") {
  auto all = crra_family();
  all.push_back(mixed_custom());
  for (const auto& u : all) {
    CAPTURE(u.tag());
    std::vector<double> ys;
    for (int i = 0; i < 64; ++i) ys.push_back(std::exp(-6.0 + 12.0 * i / 63.0));
    for (std::size_t i = 1; i + 1 < ys.size(); ++i) {
      CHECK(u.conjugate(ys[i + 1]) < u.conjugate(ys[i]));
    }
    // Second differences on an evenly spaced y grid.
    for (double y = 0.05; y < 20.0; y += 0.05) {
      const double h = 0.01;
      CHECK(u.conjugate(y + h) - 2.0 * u.conjugate(y) + u.conjugate(y - h) >= -1e-8);
    }
    for (double y : ys) {
      const double h = 1e-4 * y;
      const double fd = (u.conjugate(y + h) - u.conjugate(y - h)) / (2.0 * h);
      CHECK(fd == doctest::Approx(u.conjugate_derivative(y)).epsilon(1e-6));
      CHECK(u.conjugate_derivative(y) == -u.inverse_marginal(y));
    }
  }
}

TEST_CASE("double conjugation recovers U") {
  auto all = crra_family();
  all.push_back(mixed_custom());
  for (const auto& u : all) {
    for (double x : {0.01, 0.5, 1.0, 3.0, 100.0}) {
      double best = INFINITY;
      for (int i = 0; i <= 4000; ++i) {
        const double y = std::exp(-20.0 + 40.0 * i / 4000.0);
        best = std::min(best, u.conjugate(y) + x * y);
      }
      CAPTURE(u.tag());
      CAPTURE(x);
      CHECK(best >= u.value(x) - 1e-8);
      const double at_marginal = u.conjugate(u.marginal(x)) + x * u.marginal(x);
      CHECK(at_marginal == doctest::Approx(u.value(x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("conjugate in log form far from 1") {
  const auto u = Utility::power(2.0);
  const SignedLog far = u.conjugate_at_log(-5000.0);
  CHECK(far.sign == -1.0);
  CHECK(far.log_abs == doctest::Approx(std::log(2.0) + 0.5 * -5000.0).epsilon(1e-15));
  const SignedLog big = Utility::power(0.5).conjugate_at_log(-2000.0);
  CHECK(big.sign == 1.0);
  CHECK(big.log_abs == doctest::Approx(2000.0).epsilon(1e-15));
  const SignedLog lg = Utility::log().conjugate_at_log(-1.0);
  CHECK(lg.sign == 0.0);
  CHECK(Utility::log().log_inverse_marginal_at_log(3.0) == -3.0);
  CHECK(SignedLog::from(-2.0).value() == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(SignedLog::from(0.0).value() == 0.0);
}

TEST_CASE("tabulated utility reproduces power laws exactly") {
  // Log-log linear U' is exact for CRRA marginals, and so is its integral.
  for (const auto& u : crra_family()) {
    const auto table = Utility::table(rows_from(u, 1e-3, 1e3, 25), u.tag());
    CAPTURE(u.tag());
    for (double x : {1e-5, 2e-3, 0.7, 1.0, 55.0, 1e5}) {
      CHECK(table.marginal(x) == doctest::Approx(u.marginal(x)).epsilon(1e-11));
      CHECK(table.value(x) == doctest::Approx(u.value(x)).epsilon(1e-10));
    }
    for (double y : {0.1, 1.0, 9.0}) {
      CHECK(table.conjugate(y) == doctest::Approx(u.conjugate(y)).epsilon(1e-10));
    }
    CHECK(table.family() == UtilityFamily::kTable);
  }
}

TEST_CASE("tabulated utility from CSV") {
  const auto dir = std::filesystem::temp_directory_path() / "binutil_utility_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "log.csv";
  {
    std::ofstream out(path);
    out << "x,U,U'\n";
    for (const auto& r : rows_from(Utility::log(), 0.01, 100.0, 9)) {
      char line[128];
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\r\n", r.x, r.u, r.marginal);
      out << line;
    }
  }
  const auto u = Utility::parse("table:" + path.string());
  CHECK(u.value(3.0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(u.tag() == "table:" + path.string());

  const auto bad = dir / "bad.csv";
  {
    std::ofstream out(bad);
    out << "1,0,1\n2,0.69,0.5,7\n";
  }
  CHECK_THROWS_AS(Utility::table_from_csv(bad), InvalidSpecError);
  {
    std::ofstream out(bad);
    out << "1,0,1\nfoo,1,2\n";
  }
  CHECK_THROWS_AS(Utility::table_from_csv(bad), InvalidSpecError);
  CHECK_THROWS_AS(Utility::table_from_csv(dir / "missing.csv"), InvalidSpecError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("table validation") {
  auto rows = rows_from(Utility::log(), 0.1, 10.0, 5);
  auto swapped = rows;
  std::swap(swapped[1], swapped[2]);
  CHECK_THROWS_AS(Utility::table(swapped), InvalidSpecError);
  auto flat = rows;
  flat[3].marginal = flat[2].marginal;
  CHECK_THROWS_AS(Utility::table(flat), InvalidSpecError);
  auto inconsistent = rows;
  inconsistent[4].u += 1.0;
  CHECK_THROWS_AS(Utility::table(inconsistent), InvalidSpecError);
  auto negative = rows;
  negative[0].x = -1.0;
  CHECK_THROWS_AS(Utility::table(negative), InvalidSpecError);
  CHECK_THROWS_AS(Utility::table({rows[0]}), InvalidSpecError);
}

TEST_CASE("custom utility validation") {
  CHECK_THROWS_AS(Utility::custom([](double x) { return x; }, [](double) { return 1.0; }), InvalidSpecError);
  CHECK_THROWS_AS(Utility::custom([](double x) { return x; }, [](double x) { return x; }), InvalidSpecError);
  CHECK_THROWS_AS(Utility::custom([](double x) { return -x; }, [](double) { return -1.0; }), InvalidSpecError);
  CHECK_THROWS_AS(Utility::custom(nullptr, [](double x) { return 1.0 / x; }), InvalidSpecError);
  CHECK(mixed_custom().tag() == "custom:log_plus_sqrt");
}

TEST_CASE("spec strings") {
  CHECK(Utility::parse("log").family() == UtilityFamily::kLog);
  const auto p = Utility::parse("power:2");
  CHECK(p.family() == UtilityFamily::kPower);
  CHECK(p.gamma() == 2.0);
  CHECK(p.tag() == "power:2");
  CHECK_THROWS_AS(Utility::parse("power:abc"), InvalidSpecError);
  CHECK_THROWS_AS(Utility::parse("power:1"), InvalidSpecError);
  CHECK_THROWS_AS(Utility::parse("power:-2"), InvalidSpecError);
  CHECK_THROWS_AS(Utility::parse("exp"), InvalidSpecError);
}

TEST_CASE("non-positive arguments are domain errors") {
  const auto u = Utility::power(2.0);
  CHECK_THROWS_AS(u.conjugate(0.0), std::domain_error);
  CHECK_THROWS_AS(u.conjugate(-1.0), std::domain_error);
  CHECK_THROWS_AS(u.inverse_marginal(0.0), std::domain_error);
  CHECK_THROWS_AS(u.value(0.0), std::domain_error);
  CHECK_THROWS_AS(mixed_custom().conjugate(-3.0), std::domain_error);
}

}  // TEST_SUITE
