#pragma once

#include <Eigen/Dense>

#include "mmselab/rng.hpp"

namespace mmselab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense K x K symmetric matrix. Writes go through set(), which mirrors,
/// so the stored matrix is exactly symmetric at all times.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int dim);

  static SymMatrix identity(int dim);
  static SymMatrix diagonal(const Vector& diag);
  /// Throws std::invalid_argument unless `m` is square and symmetric to
  /// within `tol` (relative to its largest entry). The result is the exact
  /// symmetric part.
  static SymMatrix from_dense(const Matrix& m, double tol = 1e-12);

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  void set(int i, int j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  const Matrix& dense() const { return m_; }

  SymMatrix scaled(double factor) const;
  double frobenius_norm() const { return m_.norm(); }

 private:
  Matrix m_;
};

/// Elementary direction for entry (l, l'): e_l e_l'^T + e_l' e_l^T when
/// l != l', e_l e_l^T on the diagonal. Both mirrored entries move together.
SymMatrix elementary_direction(int dim, int l, int lp);

/// Unique symmetric positive-definite square root via spectral
/// decomposition. Throws std::domain_error when the smallest eigenvalue is
/// below 1e-12 times the largest one.
SymMatrix sqrt_spd(const SymMatrix& m);

/// Derivative of M -> M^{1/2} along elementary_direction(K, l, l'):
/// the D solving M^{1/2} D + D M^{1/2} = E (Daleckii-Krein form in the
/// eigenbasis). Requires l <= l'.
SymMatrix sqrt_frechet_derivative(const SymMatrix& m, int l, int lp);

/// Same, for an arbitrary symmetric direction.
SymMatrix sqrt_frechet_derivative(const SymMatrix& m, const SymMatrix& direction);

/// True when every diagonal entry exceeds the sum of absolute off-diagonal
/// entries in its row and all entries are positive.
bool strictly_diagonally_dominant_positive(const SymMatrix& m);

/// Perturbation strength lambda_n = scale * base, with its square root
/// cached at construction.
class SnrMatrix {
 public:
  /// Requires scale > 0 and base in D_K (off-diagonals in (1,2), diagonals
  /// in (2K, 2K+1)); throws std::invalid_argument otherwise.
  SnrMatrix(double scale, SymMatrix base);

  /// Any SPD lambda, outside of D_K. Used for finite differences and for
  /// test-only limits; `in_domain()` reports false.
  static SnrMatrix general(const SymMatrix& lambda);

  int dim() const { return base_.dim(); }
  double scale() const { return scale_; }
  const SymMatrix& base() const { return base_; }
  const SymMatrix& value() const { return value_; }
  const SymMatrix& sqrt() const { return sqrt_; }
  bool in_domain() const { return in_domain_; }

 private:
  SnrMatrix() = default;

  double scale_ = 0.0;
  SymMatrix base_;
  SymMatrix value_;
  SymMatrix sqrt_;
  bool in_domain_ = true;
};

bool in_snr_domain(const SymMatrix& base);

/// Uniform draw from s_n * D_K: each of the K(K+1)/2 independent entries is
/// drawn independently.
SnrMatrix sample_snr(int K, double s_n, Rng& rng);

}  // namespace mmselab
