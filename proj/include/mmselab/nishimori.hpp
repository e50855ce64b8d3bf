#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmselab/models.hpp"

namespace mmselab {

enum class Verdict { Pass, Fail, Inconclusive };
std::string to_string(Verdict v);

/// One row of the identity table. For tier "control" a pass means the
/// mismatched posterior was detected (deviation beyond 5 SE).
struct IdentityResult {
  std::string family;
  std::string identity;
  std::string tier;  // exact | mc | control
  double deviation = 0.0;
  double se = 0.0;
  double tolerance = 0.0;
  long draws = 0;
  Verdict verdict = Verdict::Inconclusive;
};

/// Committee toy with Rademacher prior and Rademacher weights, m = ceil(alpha n)
/// labels, label-flip probability `flip` and likelihood inverse temperature `beta`.
struct CommitteeToy {
  int n = 3;
  int K = 1;
  double alpha = 1.0;
  double flip = 0.0;
  double beta = 1.0;
};

/// Sums over every signal, every weight matrix and every label vector with
/// its exact probability, and compares E<g(x,X)> with E<g(x,x')> for
/// g in {Q_ll', Q_ll'^2, ||Q||_F^2}. Tolerance 1e-10. Results are tagged
/// tier "exact" (beta = 1) or "control" (beta != 1; a pass there means the
/// deviation exceeded the tolerance).
std::vector<IdentityResult> exact_nishimori_committee(const CommitteeToy& toy);

struct McIdentityConfig {
  std::shared_ptr<const ModelSpec> model;
  int n = 3;
  std::optional<SnrMatrix> snr;
  int draws = 1000;
  double beta = 1.0;
  std::uint64_t seed = 0;
  /// SEs above this make a verdict inconclusive.
  double resolution = 0.02;
  bool control = false;
  std::string family;
};

/// Quenched Monte Carlo over instances with the posterior of each one
/// computed exactly by enumeration. Checks the same Nishimori identities,
/// plus (with a side channel) E<L> = diag(E<Q>)/2 - E<Q> entrywise and the
/// vanishing antisymmetric part of E<Q>.
std::vector<IdentityResult> mc_nishimori(const McIdentityConfig& config, int workers = 1);

/// Verdict of an MC-tier comparison with zero: inconclusive for fewer than 30
/// draws or se > resolution, else pass iff |mean| <= 3 se. For controls, pass
/// iff |mean| > 5 se.
Verdict mc_verdict(double mean, double se, long draws, double resolution, bool control);

}  // namespace mmselab
