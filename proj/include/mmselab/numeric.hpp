#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace mmselab {

/// log(sum_i exp(args[i])), stable; -inf when every argument is -inf or the
/// list is empty.
inline double log_sum_exp(std::span<const double> args) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double a : args) hi = std::max(hi, a);
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double a : args) sum += std::exp(a - hi);
  return hi + std::log(sum);
}

/// Running log-sum-exp accumulator.
class LogSumExp {
 public:
  void add(double a) {
    if (a == -std::numeric_limits<double>::infinity()) return;
    if (a > max_) {
      sum_ = sum_ * std::exp(max_ - a) + 1.0;
      max_ = a;
    } else {
      sum_ += std::exp(a - max_);
    }
  }
  double value() const {
    if (sum_ == 0.0) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(sum_);
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

}  // namespace mmselab
