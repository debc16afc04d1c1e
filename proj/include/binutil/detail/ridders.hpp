#pragma once

#include <array>
#include <cmath>
#include <limits>

namespace binutil {

template <class F>
double ridders_derivative(F&& f, double x, double h, double* error) {
  constexpr int kTable = 10;
  constexpr double kShrink = 1.4;
  constexpr double kShrink2 = kShrink * kShrink;
  std::array<std::array<double, kTable>, kTable> a{};
  double best = 0.0;
  double err = std::numeric_limits<double>::max();
  a[0][0] = (f(x + h) - f(x - h)) / (2.0 * h);
  best = a[0][0];
  for (int i = 1; i < kTable; ++i) {
    h /= kShrink;
    a[0][i] = (f(x + h) - f(x - h)) / (2.0 * h);
    double fac = kShrink2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
      fac *= kShrink2;
      const double errt =
          std::max(std::abs(a[j][i] - a[j - 1][i]), std::abs(a[j][i] - a[j - 1][i - 1]));
      if (errt <= err) {
        err = errt;
        best = a[j][i];
      }
    }
    // Higher order got worse by a significant factor: stop.
    if (std::abs(a[i][i] - a[i - 1][i - 1]) >= 2.0 * err) break;
  }
  if (error != nullptr) *error = err;
  return best;
}

}  // namespace binutil
