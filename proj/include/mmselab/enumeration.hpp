#pragma once

#include <cstddef>
#include <vector>

#include "mmselab/models.hpp"
#include "mmselab/parallel.hpp"

namespace mmselab {

inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 24;

/// Exact posterior over the finite support |A|^n of row values (A = prior
/// atoms, or the generative kernel's output alphabet). Support elements are
/// decoded from their index on demand rather than stored.
class EnumeratedPosterior {
 public:
  EnumeratedPosterior(int n, std::vector<Vector> alphabet, std::vector<double> log_weights);

  std::size_t size() const { return log_weights_.size(); }
  int n() const { return n_; }
  int K() const { return static_cast<int>(alphabet_.front().size()); }
  const std::vector<Vector>& alphabet() const { return alphabet_; }

  SignalMatrix configuration(std::size_t index) const;
  const std::vector<double>& log_weights() const { return log_weights_; }
  double log_partition() const { return log_partition_; }
  /// exp(log_weight - log_partition), aligned with the support.
  const std::vector<double>& probabilities() const { return probs_; }

 private:
  int n_;
  std::vector<Vector> alphabet_;
  std::vector<double> log_weights_;
  std::vector<double> probs_;
  double log_partition_;
};

/// Row alphabet used for enumeration; throws for continuous priors.
std::vector<Vector> enumeration_alphabet(const QuenchedInstance& inst);

/// Exhaustive posterior (tempered by `beta` on the likelihood terms).
/// Throws std::invalid_argument for continuous priors and std::length_error,
/// with the support size in the message, when |A|^n exceeds `cap`.
EnumeratedPosterior enumerate_posterior(const QuenchedInstance& inst, double beta = 1.0,
                                        std::size_t cap = kDefaultEnumerationCap,
                                        Execution exec = Execution::Parallel);

/// <g(x)> for g returning a double or an Eigen matrix.
template <class G>
auto posterior_expectation(const EnumeratedPosterior& post, G&& g) {
  const auto& p = post.probabilities();
  using R = std::decay_t<decltype(g(post.configuration(0)))>;
  R acc = g(post.configuration(0)) * p[0];
  for (std::size_t s = 1; s < post.size(); ++s) {
    if (p[s] == 0.0) continue;
    acc = acc + g(post.configuration(s)) * p[s];
  }
  return acc;
}

/// <g(x, x')> under the product measure of two independent replicas.
template <class G>
auto pair_expectation(const EnumeratedPosterior& post, G&& g) {
  const auto& p = post.probabilities();
  std::vector<SignalMatrix> cfg;
  std::vector<double> w;
  for (std::size_t s = 0; s < post.size(); ++s) {
    if (p[s] == 0.0) continue;
    cfg.push_back(post.configuration(s));
    w.push_back(p[s]);
  }
  using R = std::decay_t<decltype(g(cfg[0], cfg[0]))>;
  R acc = g(cfg[0], cfg[0]) * (w[0] * w[0]);
  for (std::size_t a = 0; a < cfg.size(); ++a)
    for (std::size_t b = 0; b < cfg.size(); ++b) {
      if (a == 0 && b == 0) continue;
      acc = acc + g(cfg[a], cfg[b]) * (w[a] * w[b]);
    }
  return acc;
}

SignalMatrix posterior_mean(const EnumeratedPosterior& post);

}  // namespace mmselab
