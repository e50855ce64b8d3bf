#pragma once

#include <string>
#include <vector>

namespace mmselab {

struct ScalingPoint {
  double rate = 0.0;   // rate variable v (e.g. s_n n)
  double value = 0.0;  // statistic y > 0
  double se = 0.0;
};

/// Fit of log y = log C + slope * log v.
struct FitResult {
  double slope = 0.0;
  double slope_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double log_constant = 0.0;
  double constant = 0.0;
  double chi2 = 0.0;
  std::vector<double> residuals;  // log y - fitted, per point
  bool weighted = false;
  bool degenerate = false;
  std::string diagnostic;
};

/// Weighted least squares on log-log axes with weights (y / se)^2 (ordinary
/// least squares when some se is 0). The confidence interval is slope +/-
/// ci_sigmas * slope_se. Needs at least 3 points; throws
/// std::invalid_argument on fewer points or on non-positive statistics or
/// rate variables. Fewer than 3 distinct rate values give a fit flagged
/// degenerate (slope NaN when they are all equal).
FitResult fit_scaling(const std::vector<ScalingPoint>& points, double ci_sigmas = 3.0);

}  // namespace mmselab
