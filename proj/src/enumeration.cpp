#include "mmselab/enumeration.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmselab/numeric.hpp"

namespace mmselab {

EnumeratedPosterior::EnumeratedPosterior(int n, std::vector<Vector> alphabet, std::vector<double> log_weights)
    : n_(n), alphabet_(std::move(alphabet)), log_weights_(std::move(log_weights)) {
  log_partition_ = log_sum_exp(log_weights_);
  if (!std::isfinite(log_partition_)) throw std::domain_error("enumerated posterior has zero total weight");
  probs_.resize(log_weights_.size());
  for (std::size_t s = 0; s < log_weights_.size(); ++s) probs_[s] = std::exp(log_weights_[s] - log_partition_);
}

SignalMatrix EnumeratedPosterior::configuration(std::size_t index) const {
  const std::size_t A = alphabet_.size();
  SignalMatrix x(n_, K());
  for (int i = 0; i < n_; ++i) {
    x.row(i) = alphabet_[index % A].transpose();
    index /= A;
  }
  return x;
}

std::vector<Vector> enumeration_alphabet(const QuenchedInstance& inst) {
  const ModelSpec& spec = *inst.model;
  if (spec.generative) return spec.generative->impl->finite_outputs(spec.K());
  if (!spec.prior.is_discrete()) throw std::invalid_argument("enumerate_posterior: prior is continuous");
  std::vector<Vector> atoms;
  for (int a = 0; a < spec.prior.support_size(); ++a) atoms.push_back(spec.prior.atom(a));
  return atoms;
}

EnumeratedPosterior enumerate_posterior(const QuenchedInstance& inst, double beta, std::size_t cap, Execution exec) {
  std::vector<Vector> alphabet = enumeration_alphabet(inst);
  const int n = inst.n();
  const std::size_t A = alphabet.size();
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) {
    if (total > cap / A) {
      std::ostringstream msg;
      msg << "enumerate_posterior: support size " << A << "^" << n << " exceeds cap " << cap;
      throw std::length_error(msg.str());
    }
    total *= A;
  }

  std::vector<double> lw(total);
  auto weight_at = [&](std::size_t idx) {
    SignalMatrix x(n, inst.K());
    std::size_t code = idx;
    for (int i = 0; i < n; ++i) {
      x.row(i) = alphabet[code % A].transpose();
      code /= A;
    }
    return log_posterior_weight(x, inst, beta);
  };

  if (exec == Execution::Serial) {
    for (std::size_t s = 0; s < total; ++s) lw[s] = weight_at(s);
  } else {
    const long long count = static_cast<long long>(total);
#pragma omp parallel for schedule(static)
    for (long long s = 0; s < count; ++s) lw[static_cast<std::size_t>(s)] = weight_at(static_cast<std::size_t>(s));
  }
  return EnumeratedPosterior(n, std::move(alphabet), std::move(lw));
}

SignalMatrix posterior_mean(const EnumeratedPosterior& post) {
  return posterior_expectation(post, [](const SignalMatrix& x) { return x; });
}

}  // namespace mmselab
