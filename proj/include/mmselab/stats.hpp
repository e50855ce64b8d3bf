#pragma once

#include <cmath>
#include <vector>

namespace mmselab {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Sample mean with the standard error of the mean (0 for fewer than two values).
Estimate mean_se(const std::vector<double>& values);

/// Unbiased sample variance with the standard error of that estimate,
/// sqrt((m4 - s^4 (N-3)/(N-1)) / N) with m4 the fourth central moment.
Estimate sample_variance(const std::vector<double>& values);

/// Delete-one-group jackknife. `stat(g)` must return the statistic computed
/// without group g; `stat(-1)` the full-sample value, which is reported.
template <class F>
Estimate jackknife(int groups, F&& stat) {
  Estimate e{stat(-1), 0.0};
  if (groups < 2) return e;
  std::vector<double> loo(static_cast<std::size_t>(groups));
  double mean = 0.0;
  for (int g = 0; g < groups; ++g) {
    loo[static_cast<std::size_t>(g)] = stat(g);
    mean += loo[static_cast<std::size_t>(g)];
  }
  mean /= groups;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  e.se = std::sqrt(ss * (groups - 1) / groups);
  return e;
}

}  // namespace mmselab
