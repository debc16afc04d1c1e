#include <cmath>
#include <random>

#include <doctest.h>

#include "binutil/value_functions.hpp"
#include "oracles.hpp"

using namespace binutil;

namespace {

double log_v_closed(double y) { return -std::log(y) - 7.0 / 8.0; }

// v(y) = c y^r exp(r (r - 1) / 8) with r = (gamma - 1)/gamma, c = gamma/(1 - gamma).
double power_v_closed(double gamma, double y) {
  const double r = (gamma - 1.0) / gamma;
  return gamma / (1.0 - gamma) * std::pow(y, r) * std::exp(r * (r - 1.0) / 8.0);
}

Utility divergent_custom() {
  return Utility::custom(
      [](double x) {
        const double l = std::log(M_E + x);
        return 2.0 * std::sqrt(x) + x / l;
      },
      [](double x) {
        const double l = std::log(M_E + x);
        return 1.0 / std::sqrt(x) + 1.0 / l - x / ((M_E + x) * l * l);
      },
      "slow_decay");
}

std::vector<std::int64_t> doubling(int lo, int hi) {
  std::vector<std::int64_t> out;
  for (int j = lo; j <= hi; ++j) out.push_back(std::int64_t{1} << j);
  return out;
}

}  // namespace

TEST_SUITE("value_functions") {

TEST_CASE("continuous closed forms") {
  for (double y : {0.01, 0.5, 1.0, 2.0, 30.0}) {
    CAPTURE(y);
    const auto v = v_continuous(Utility::log(), y);
    CHECK(v.finite);
    CHECK(v.value == doctest::Approx(log_v_closed(y)).epsilon(1e-12));
    CHECK(std::abs(v.value - log_v_closed(y)) <= std::max(v.error_estimate, 1e-14));
    CHECK_FALSE(v.n.has_value());
    for (double gamma : {0.5, 2.0, 5.0}) {
      CAPTURE(gamma);
      CHECK(v_continuous(Utility::power(gamma), y).value ==
            doctest::Approx(power_v_closed(gamma, y)).epsilon(1e-12));
    }
  }
  ContinuousModel model;
  for (double x : {0.1, 1.0, 4.0}) {
    const auto u = u_from_v(Utility::log(), model, x);
    CHECK(u.value == doctest::Approx(std::log(x) + 0.125).epsilon(1e-10));
    CHECK(*u.dual_argument == doctest::Approx(1.0 / x).epsilon(1e-8));
    const auto w = u_from_v(Utility::power(2.0), model, x);
    CHECK(w.value == doctest::Approx(-std::exp(-1.0 / 16.0) / x).epsilon(1e-10));
    CHECK(*w.first_order_residual <= 1e-8 * x);
  }
}

TEST_CASE("continuous slope matches closed form") {
  ContinuousModel model;
  for (double y : {0.2, 1.0, 5.0}) {
    CHECK(model.slope(Utility::log(), y).value == doctest::Approx(-1.0 / y).epsilon(1e-12));
  }
}

TEST_CASE("truncation: doubling the range changes v by less than its error estimate") {
  ContinuousModel model;
  for (const auto& u : {Utility::log(), Utility::power(0.5), Utility::power(3.0)}) {
    for (double y : {0.1, 1.0, 10.0}) {
      const auto L = model.truncation_half_width(u, y);
      REQUIRE(L.has_value());
      CHECK(*L >= 8.0);
      const auto a = model.value_on(u, y, *L);
      const auto b = model.value_on(u, y, 2.0 * *L);
      CHECK(std::abs(a.value - b.value) <= 2.0 * std::max(a.error_estimate, b.error_estimate));
    }
  }
}

TEST_CASE("one-step model by hand") {
  const BinomialGrid grid(1, 0.5);
  const auto c = coefficients(1, 0.5);
  for (double y : {0.3, 1.0, 7.0}) {
    const auto v = v_discrete(Utility::log(), grid, c, y);
    CHECK(*v.n == 1);
    CHECK(v.value == doctest::Approx(-std::log(y) - 1.0 + c.b).epsilon(1e-15));
  }
  const auto gap = v_discrete(Utility::log(), grid, c, 1.0).value - v_continuous(Utility::log(), 1.0).value;
  CHECK(gap == doctest::Approx(c.b - 0.125).epsilon(1e-12));
}

TEST_CASE("discrete dual value matches the exact-probability oracle") {
  for (double p : {0.5, 0.7}) {
    for (std::int64_t n : {1, 2, 5, 12, 20}) {
      const BinomialGrid grid(n, p);
      const auto c = coefficients(n, p);
      const auto law = oracle::atoms(n, p);
      for (double y : {0.25, 1.0, 3.0}) {
        CAPTURE(p);
        CAPTURE(n);
        CAPTURE(y);
        const double lg = static_cast<double>(
            oracle::dual_value(law, [](long double s) { return -std::log(s) - 1.0L; }, y));
        CHECK(v_discrete(Utility::log(), grid, c, y).value == doctest::Approx(lg).epsilon(1e-12));
        const double pw = static_cast<double>(
            oracle::dual_value(law, [](long double s) { return -2.0L * std::sqrt(s); }, y));
        CHECK(v_discrete(Utility::power(2.0), grid, c, y).value == doctest::Approx(pw).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("discrete primal value matches the first-order-condition oracle") {
  for (double p : {0.5, 0.7}) {
    for (std::int64_t n : {1, 3, 8}) {
      const BinomialGrid grid(n, p);
      const DiscreteModel model(grid, coefficients(n, p));
      const auto law = oracle::atoms(n, p);
      for (double x : {0.5, 2.0}) {
        const double expected = static_cast<double>(oracle::optimal_expected_utility(
            law, [](long double s) { return -1.0L / s; }, [](long double s) { return 1.0L / (s * s); }, x));
        CAPTURE(p);
        CAPTURE(n);
        CHECK(u_from_v(Utility::power(2.0), model, x).value == doctest::Approx(expected).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("summation order does not matter") {
  for (std::int64_t n : {64, 4096, 65536}) {
    const BinomialGrid grid(n, 0.6);
    const auto c = coefficients(n, 0.6);
    for (const auto& u : {Utility::log(), Utility::power(0.5), Utility::power(4.0)}) {
      const double up = v_discrete(u, grid, c, 1.3, SummationOrder::kAscending).value;
      const double down = v_discrete(u, grid, c, 1.3, SummationOrder::kDescending).value;
      CHECK(std::abs(up - down) <= 1e-12 * std::max(1.0, std::abs(up)));
    }
  }
}

TEST_CASE("weak duality on random arguments") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> s(-3.0, 3.0);
  const BinomialGrid grid(40, 0.65);
  const DiscreteModel model(grid, coefficients(40, 0.65));
  const auto u = Utility::power(0.5);
  for (double x : {0.3, 1.0, 6.0}) {
    const double primal = u_from_v(u, model, x).value;
    for (int i = 0; i < 16; ++i) {
      const double y = std::exp(s(rng));
      CHECK(primal <= model.value(u, y).value + x * y + 1e-12);
    }
  }
}

TEST_CASE("primal and dual are consistent along v'") {
  const BinomialGrid grid(256, 0.55);
  const DiscreteModel model(grid, coefficients(256, 0.55));
  const auto u = Utility::log();
  for (int i = 0; i < 32; ++i) {
    const double y = std::exp(-3.0 + 6.0 * i / 31.0);
    const double x = -model.slope(u, y).value;
    const auto primal = u_from_v(u, model, x);
    CHECK(primal.value == doctest::Approx(model.value(u, y).value + x * y).epsilon(1e-6));
    CHECK(*primal.dual_argument == doctest::Approx(y).epsilon(1e-6));
  }
}

TEST_CASE("convergence sweeps") {
  const auto dual = convergence_sweep(Utility::log(), 0.5, 1.0, SweepMode::kDual, doubling(4, 16));
  CHECK(dual.rows.size() == 13);
  CHECK(dual.all_rows_ok);
  CHECK(dual.final_gap_below_tolerance);
  CHECK(dual.limsup_consistent);
  CHECK(dual.liminf_consistent);
  for (const auto& r : dual.rows) {
    const double b = coefficients(r.n, 0.5).b;
    CHECK(r.gap == doctest::Approx(b - 0.125).epsilon(1e-9));
  }
  REQUIRE(dual.observed_rate.has_value());
  CHECK(*dual.observed_rate > 0.5);

  const auto primal = convergence_sweep(Utility::power(0.5), 0.6, 1.0, SweepMode::kPrimal, doubling(4, 14));
  CHECK(primal.all_rows_ok);
  CHECK(std::abs(primal.rows.back().gap) < 1e-3);
  CHECK(primal.final_gap_below_tolerance);

  const auto first = convergence_sweep(Utility::log(), 0.5, 1.0, SweepMode::kDual, {1});
  CHECK(first.rows.front().gap == doctest::Approx(coefficients(1, 0.5).b - 0.125).epsilon(1e-12));

  const auto strict = convergence_sweep(Utility::log(), 0.5, 1.0, SweepMode::kDual, doubling(4, 8), 0.0);
  CHECK_FALSE(strict.final_gap_below_tolerance);

  CHECK_THROWS_AS(convergence_sweep(Utility::log(), 0.4, 1.0, SweepMode::kDual, {4}), std::domain_error);
  CHECK_THROWS_AS(convergence_sweep(Utility::log(), 1.0, 1.0, SweepMode::kDual, {4}), std::domain_error);
  CHECK_THROWS_AS(convergence_sweep(Utility::log(), 0.5, 1.0, SweepMode::kDual, {}), std::invalid_argument);
  CHECK_THROWS_AS(convergence_sweep(Utility::log(), 0.5, 1.0, SweepMode::kDual, {8, 4}), std::invalid_argument);
}

TEST_CASE("Kolmogorov distance shrinks with n") {
  double last = 1.0;
  for (std::int64_t n : doubling(2, 14)) {
    const double d = kolmogorov_distance(BinomialGrid(n, 0.5));
    CHECK(d < last);
    CHECK(d * std::sqrt(static_cast<double>(n)) < 0.5);
    last = d;
  }
  CHECK(kolmogorov_distance(BinomialGrid(1, 0.5)) == doctest::Approx(0.5 - std::erfc(1.0 / std::sqrt(2.0)) / 2.0));
}

TEST_CASE("Gaussian tail integrals of H") {
  // log utility at y = 1: H(w) = w/2 - 7/8.
  auto phi = [](double a) { return std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI); };
  auto upper = [](double a) { return 0.5 * std::erfc(a / std::sqrt(2.0)); };
  for (double a : {2.0, 4.0, 10.0, 30.0}) {
    const double right = 0.5 * phi(a) - 0.875 * upper(a);
    CHECK(log_gaussian_tail_integral(Utility::log(), 1.0, a, TailSide::kRight) ==
          doctest::Approx(std::log(right)).epsilon(1e-10));
    const double left = 0.875 * upper(a) + 0.5 * phi(a);
    CHECK(log_gaussian_tail_integral(Utility::log(), 1.0, -a, TailSide::kLeft) ==
          doctest::Approx(std::log(left)).epsilon(1e-10));
  }
}

TEST_CASE("uniform integrability probe") {
  const std::vector<double> levels = {1, 2, 4, 8, 16};
  const auto report = uniform_integrability_probe(Utility::log(), 0.5, 1.0, levels, doubling(4, 10));
  CHECK(report.sups_monotone);
  CHECK(report.dominance_holds);
  CHECK(report.levels.size() == levels.size());
  CHECK(report.cells.size() == levels.size() * 7);
  for (std::size_t i = 1; i < report.levels.size(); ++i) {
    CHECK(report.levels[i].sup_right_tail <= report.levels[i - 1].sup_right_tail);
    CHECK(report.levels[i].sup_left_tail <= report.levels[i - 1].sup_left_tail);
  }
  // No atom reaches |H| > 1e6 for log utility on these grids.
  const auto empty = uniform_integrability_probe(Utility::log(), 0.5, 1.0, {1e6}, doubling(4, 10));
  CHECK(empty.levels.front().sup_right_tail == 0.0);
  CHECK(empty.levels.front().sup_left_tail == 0.0);

  const auto skewed = uniform_integrability_probe(Utility::power(2.0), 0.7, 0.5, levels, doubling(4, 9));
  CHECK(skewed.sups_monotone);

  CHECK_THROWS_AS(uniform_integrability_probe(Utility::log(), 0.4, 1.0, levels, {16}), std::domain_error);
  const auto probe = uniform_integrability_probe(Utility::log(), 0.4, 1.0, levels, doubling(4, 8), true);
  CHECK(probe.probe);
  CHECK(probe.sups_monotone);
}

TEST_CASE("divergent expectations are reported, not thrown") {
  const auto u = divergent_custom();
  for (double y : {0.1, 1.0, 10.0}) {
    const auto v = v_continuous(u, y);
    CHECK_FALSE(v.finite);
    CHECK(std::isinf(v.value));
    CHECK_FALSE(v.reason.empty());
  }
  CHECK_FALSE(finiteness_threshold(u, 1e-3, 1e3).has_value());
  CHECK(*finiteness_threshold(Utility::log(), 1e-3, 1e3) == 1e-3);
}

TEST_CASE("argument and shape errors") {
  CHECK_THROWS_AS(v_continuous(Utility::log(), 0.0), std::domain_error);
  CHECK_THROWS_AS(v_continuous(Utility::log(), -1.0), std::domain_error);
  const BinomialGrid grid(8, 0.5);
  CHECK_THROWS_AS(DiscreteModel(grid, coefficients(16, 0.5)), std::invalid_argument);
  CHECK_THROWS_AS(DiscreteModel(grid, coefficients(8, 0.6)), std::invalid_argument);
  CHECK_THROWS_AS(v_discrete(Utility::log(), grid, coefficients(8, 0.5), std::nan("")), std::domain_error);
  CHECK_THROWS_AS(u_from_v(Utility::log(), ContinuousModel{}, 0.0), std::domain_error);
}

}  // TEST_SUITE
