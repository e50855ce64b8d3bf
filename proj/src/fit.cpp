#include "mmselab/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace mmselab {

FitResult fit_scaling(const std::vector<ScalingPoint>& points, double ci_sigmas) {
  if (points.size() < 3) throw std::invalid_argument("fit_scaling: need at least 3 points");
  for (const auto& p : points) {
    if (!(p.value > 0.0)) throw std::invalid_argument("fit_scaling: statistics must be positive for a log-log fit");
    if (!(p.rate > 0.0)) throw std::invalid_argument("fit_scaling: rate variables must be positive");
    if (p.se < 0.0) throw std::invalid_argument("fit_scaling: negative standard error");
  }

  FitResult fit;
  std::set<double> distinct;
  for (const auto& p : points) distinct.insert(p.rate);
  if (distinct.size() < 2) {
    fit.degenerate = true;
    fit.slope = fit.slope_se = fit.ci_low = fit.ci_high = std::numeric_limits<double>::quiet_NaN();
    fit.log_constant = fit.constant = std::numeric_limits<double>::quiet_NaN();
    fit.diagnostic = "degenerate fit: all rate values are identical";
    return fit;
  }
  if (distinct.size() < 3) {
    fit.degenerate = true;
    fit.diagnostic = "degenerate fit: only 2 distinct rate values, no residual degrees of freedom";
  }

  fit.weighted = std::all_of(points.begin(), points.end(), [](const ScalingPoint& p) { return p.se > 0.0; });
  const std::size_t N = points.size();
  std::vector<double> x(N), y(N), w(N);
  for (std::size_t i = 0; i < N; ++i) {
    x[i] = std::log(points[i].rate);
    y[i] = std::log(points[i].value);
    // se of log y is se / y to first order
    w[i] = fit.weighted ? std::pow(points[i].value / points[i].se, 2) : 1.0;
  }
  double S = 0, Sx = 0, Sy = 0;
  for (std::size_t i = 0; i < N; ++i) {
    S += w[i];
    Sx += w[i] * x[i];
    Sy += w[i] * y[i];
  }
  const double xm = Sx / S;
  const double ym = Sy / S;
  double Sxx = 0, Sxy = 0;
  for (std::size_t i = 0; i < N; ++i) {
    Sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    Sxy += w[i] * (x[i] - xm) * (y[i] - ym);
  }
  fit.slope = Sxy / Sxx;
  fit.log_constant = ym - fit.slope * xm;
  fit.constant = std::exp(fit.log_constant);
  double rss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    double r = y[i] - (fit.log_constant + fit.slope * x[i]);
    fit.residuals.push_back(r);
    rss += w[i] * r * r;
  }
  fit.chi2 = rss;
  if (fit.weighted) {
    fit.slope_se = std::sqrt(1.0 / Sxx);
  } else {
    fit.slope_se = N > 2 ? std::sqrt(rss / static_cast<double>(N - 2) / Sxx) : 0.0;
  }
  fit.ci_low = fit.slope - ci_sigmas * fit.slope_se;
  fit.ci_high = fit.slope + ci_sigmas * fit.slope_se;
  return fit;
}

}  // namespace mmselab
