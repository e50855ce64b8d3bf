#include "mmselab/prior.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mmselab {

PriorSpec PriorSpec::discrete(std::vector<Vector> support, std::vector<double> probs, double S) {
  if (support.empty()) throw std::invalid_argument("discrete prior: empty support");
  if (support.size() != probs.size()) throw std::invalid_argument("discrete prior: support/probability size mismatch");
  if (!(S > 0.0)) throw std::invalid_argument("discrete prior: S must be positive");
  const int K = static_cast<int>(support.front().size());
  if (K < 1) throw std::invalid_argument("discrete prior: K must be >= 1");
  double total = 0.0;
  for (std::size_t a = 0; a < support.size(); ++a) {
    if (support[a].size() != K) throw std::invalid_argument("discrete prior: atoms of different dimension");
    if (support[a].cwiseAbs().maxCoeff() > S) throw std::invalid_argument("discrete prior: atom outside [-S,S]^K");
    if (!(probs[a] > 0.0)) throw std::invalid_argument("discrete prior: probabilities must be positive");
    total += probs[a];
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("discrete prior: probabilities do not sum to 1");

  PriorSpec p;
  p.kind_ = Kind::Discrete;
  p.K_ = K;
  p.S_ = S;
  p.support_ = std::move(support);
  p.probs_ = std::move(probs);
  for (double q : p.probs_) p.log_probs_.push_back(std::log(q));
  return p;
}

PriorSpec PriorSpec::binary(int K, double p_plus) {
  if (K < 1) throw std::invalid_argument("binary prior: K must be >= 1");
  if (!(p_plus > 0.0 && p_plus < 1.0)) throw std::invalid_argument("binary prior: p_plus must be in (0,1)");
  std::vector<Vector> support;
  std::vector<double> probs;
  for (int code = 0; code < (1 << K); ++code) {
    Vector v(K);
    double pr = 1.0;
    for (int k = 0; k < K; ++k) {
      bool plus = ((code >> k) & 1) != 0;
      v(k) = plus ? 1.0 : -1.0;
      pr *= plus ? p_plus : 1.0 - p_plus;
    }
    support.push_back(v);
    probs.push_back(pr);
  }
  // Renormalise to absorb round-off in the products.
  double total = 0.0;
  for (double q : probs) total += q;
  for (double& q : probs) q /= total;
  return discrete(std::move(support), std::move(probs), 1.0);
}

PriorSpec PriorSpec::rademacher(int K) { return binary(K, 0.5); }

PriorSpec PriorSpec::uniform_box(int K, double S) {
  if (K < 1) throw std::invalid_argument("uniform-box prior: K must be >= 1");
  if (!(S > 0.0)) throw std::invalid_argument("uniform-box prior: S must be positive");
  PriorSpec p;
  p.kind_ = Kind::UniformBox;
  p.K_ = K;
  p.S_ = S;
  return p;
}

int PriorSpec::find_atom(const RowVector& row) const {
  for (std::size_t a = 0; a < support_.size(); ++a)
    if ((support_[a].transpose() - row).cwiseAbs().maxCoeff() == 0.0) return static_cast<int>(a);
  return -1;
}

double PriorSpec::log_density(const RowVector& row) const {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (row.size() != K_) throw std::invalid_argument("log_density: row dimension mismatch");
  if (kind_ == Kind::UniformBox) {
    if (row.cwiseAbs().maxCoeff() > S_) return kNegInf;
    return -K_ * std::log(2.0 * S_);
  }
  int a = find_atom(row);
  return a < 0 ? kNegInf : log_probs_[a];
}

Matrix PriorSpec::second_moment() const {
  if (kind_ == Kind::UniformBox) return Matrix::Identity(K_, K_) * (S_ * S_ / 3.0);
  Matrix m = Matrix::Zero(K_, K_);
  for (std::size_t a = 0; a < support_.size(); ++a) m += probs_[a] * support_[a] * support_[a].transpose();
  return m;
}

Vector PriorSpec::mean() const {
  Vector m = Vector::Zero(K_);
  if (kind_ == Kind::UniformBox) return m;
  for (std::size_t a = 0; a < support_.size(); ++a) m += probs_[a] * support_[a];
  return m;
}

std::string PriorSpec::describe() const {
  std::ostringstream s;
  if (kind_ == Kind::UniformBox)
    s << "uniform_box(K=" << K_ << ", S=" << S_ << ")";
  else
    s << "discrete(K=" << K_ << ", atoms=" << support_.size() << ", S=" << S_ << ")";
  return s.str();
}

RowVector sample_prior_row(const PriorSpec& prior, Rng& rng) {
  const int K = prior.K();
  RowVector row(K);
  if (prior.kind() == PriorSpec::Kind::UniformBox) {
    for (int k = 0; k < K; ++k) row(k) = rng.uniform(-prior.S(), prior.S());
    return row;
  }
  double u = rng.uniform();
  double acc = 0.0;
  int pick = prior.support_size() - 1;
  for (int a = 0; a < prior.support_size(); ++a) {
    acc += prior.prob(a);
    if (u < acc) {
      pick = a;
      break;
    }
  }
  return prior.atom(pick).transpose();
}

SignalMatrix sample_prior(const PriorSpec& prior, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_prior: n must be >= 1");
  SignalMatrix x(n, prior.K());
  for (int i = 0; i < n; ++i) x.row(i) = sample_prior_row(prior, rng);
  return x;
}

}  // namespace mmselab
