#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace binutil {

/// Neumaier's variant of Kahan summation. Terms are accumulated in the order
/// they are added, so results are reproducible for a fixed order.
class CompensatedSum {
 public:
  void add(double term) {
    const double t = sum_ + term;
    if (std::abs(sum_) >= std::abs(term)) {
      compensation_ += (sum_ - t) + term;
    } else {
      compensation_ += (term - t) + sum_;
    }
    sum_ = t;
    abs_sum_ += std::abs(term);
    ++count_;
  }

  double value() const { return sum_ + compensation_; }
  // Sum of |terms|, used for a-priori error bounds.
  double abs_sum() const { return abs_sum_; }
  std::size_t count() const { return count_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
  double abs_sum_ = 0.0;
  std::size_t count_ = 0;
};

inline double compensated_sum(std::span<const double> terms) {
  CompensatedSum acc;
  for (double t : terms) acc.add(t);
  return acc.value();
}

/// log(exp(a) + exp(b)) without overflow; -inf is the additive identity.
inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

/// Running log-space sum of positive terms given by their logarithms.
/// Terms are rescaled against the running maximum and summed with
/// compensation, so a long run of comparable terms loses no more than a
/// few ulps.
class LogSumAccumulator {
 public:
  void add_log(double log_term) {
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (log_term > reference_) {
      // Rescale what we have to the new reference.
      const double scale = std::exp(reference_ - log_term);
      sum_ = CompensatedSum{};
      if (partial_ > 0.0) sum_.add(partial_ * scale);
      reference_ = log_term;
    }
    sum_.add(std::exp(log_term - reference_));
    partial_ = sum_.value();
  }

  /// log of the accumulated sum; -inf when empty.
  double log_value() const {
    if (partial_ <= 0.0) return -std::numeric_limits<double>::infinity();
    return reference_ + std::log(partial_);
  }

 private:
  double reference_ = -std::numeric_limits<double>::infinity();
  CompensatedSum sum_;
  double partial_ = 0.0;
};

}  // namespace binutil
