#include "mmselab/stats.hpp"

namespace mmselab {

Estimate mean_se(const std::vector<double>& values) {
  const std::size_t N = values.size();
  if (N == 0) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(N);
  if (N < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(N - 1) / static_cast<double>(N))};
}

Estimate sample_variance(const std::vector<double>& values) {
  const double N = static_cast<double>(values.size());
  if (values.size() < 2) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= N;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : values) {
    double d = (v - mean) * (v - mean);
    m2 += d;
    m4 += d * d;
  }
  double s2 = m2 / (N - 1.0);
  m4 /= N;
  double var_of_s2 = (m4 - s2 * s2 * (N - 3.0) / (N - 1.0)) / N;
  return {s2, std::sqrt(std::max(0.0, var_of_s2))};
}

}  // namespace mmselab
