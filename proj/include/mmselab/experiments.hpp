#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmselab/config.hpp"
#include "mmselab/report.hpp"

namespace mmselab {

/// Each runner expects a validated config (see validate()). Failures of a
/// single grid point are recorded in RunReport::failures and the run goes on.
RunReport run_concentration(const ExperimentConfig& config);
RunReport run_identity_suite(const ExperimentConfig& config);
RunReport run_free_energy(const ExperimentConfig& config);
RunReport run_mmse_sweep(const ExperimentConfig& config);

/// FluctuationConfig equivalent to the concentration section of `config`.
FluctuationConfig fluctuation_config(const ExperimentConfig& config);

/// Gibbs estimates against exact enumeration for one model family.
struct SamplerCheckConfig {
  std::shared_ptr<const ModelSpec> model;
  int n = 3;
  double snr_scale = 0.0;  // 0: no side channel
  int instances = 20;
  int replicas = 2;
  ChainConfig chain{500, 4000, 1};
  std::uint64_t seed = 0;
};

struct SamplerCheckResult {
  std::string family;
  int comparisons = 0;     // quantities with a positive SE
  double chi2 = 0.0;       // sum of z^2
  double chi2_sd = 0.0;    // standard deviation used for the chi2 test
  int beyond_3se = 0;      // count of |z| > 3
  double max_abs_z = 0.0;
  int flagged_instances = 0;  // instances with some |z| > 3 or a mismatch
  int flagged_limit = 0;
  int mismatched_exact = 0;  // never-moving series further than 3 resolution units from enumeration
  bool chi2_ok = false;
  bool count_ok = false;
  bool pass() const { return chi2_ok && count_ok; }
};

/// Compares every one-point marginal <x_ik> and every entry of <Q> from
/// Gibbs with the enumerated posterior on `instances` random instances.
/// z = (gibbs - exact) / se with a batch-means se pooled over replicas and
/// floored at the resolution of the sample mean. The family passes when
/// sum z^2 exceeds its mean d by at most 3 standard deviations and the
/// number of instances with some |z| > 3 stays below a Poisson quantile at
/// the one-sided 3-sigma level.
SamplerCheckResult sampler_check(const SamplerCheckConfig& config, int workers = 1);

}  // namespace mmselab
