#pragma once

#include <string>
#include <vector>

#include "mmselab/matrix_core.hpp"
#include "mmselab/rng.hpp"

namespace mmselab {

/// n x K signal; row i is the K-vector X_i. Row-major since every sampler
/// works row by row.
using SignalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Per-row prior p_0 on [-S,S]^K; the full prior is its n-fold product.
class PriorSpec {
 public:
  enum class Kind { Discrete, UniformBox };

  /// Finite support of K-vectors with probabilities. Throws on empty
  /// support, mismatched sizes, entries outside [-S,S] or probabilities not
  /// summing to 1 within 1e-12.
  static PriorSpec discrete(std::vector<Vector> support, std::vector<double> probs, double S);
  /// Uniform on {-1,+1}^K.
  static PriorSpec rademacher(int K);
  /// Independent +/-1 entries with P(+1) = p_plus.
  static PriorSpec binary(int K, double p_plus);
  /// Continuous uniform on [-S,S]^K.
  static PriorSpec uniform_box(int K, double S);

  Kind kind() const { return kind_; }
  bool is_discrete() const { return kind_ == Kind::Discrete; }
  int K() const { return K_; }
  double S() const { return S_; }

  int support_size() const { return static_cast<int>(support_.size()); }
  const Vector& atom(int a) const { return support_[a]; }
  double log_prob(int a) const { return log_probs_[a]; }
  double prob(int a) const { return probs_[a]; }

  /// Index of `row` in the discrete support, -1 when absent.
  int find_atom(const RowVector& row) const;
  /// ln p_0(row); -inf outside the support.
  double log_density(const RowVector& row) const;

  /// E[X_1 X_1^T] and E[X_1].
  Matrix second_moment() const;
  Vector mean() const;

  std::string describe() const;

 private:
  Kind kind_ = Kind::Discrete;
  int K_ = 0;
  double S_ = 1.0;
  std::vector<Vector> support_;
  std::vector<double> probs_;
  std::vector<double> log_probs_;
};

/// n i.i.d. rows from p_0.
SignalMatrix sample_prior(const PriorSpec& prior, int n, Rng& rng);

/// Draws one row.
RowVector sample_prior_row(const PriorSpec& prior, Rng& rng);

}  // namespace mmselab
