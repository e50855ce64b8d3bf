#include "mmselab/matrix_core.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mmselab {

namespace {

struct Spectrum {
  Vector values;
  Matrix vectors;
};

Spectrum checked_spectrum(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.dense());
  if (solver.info() != Eigen::Success) throw std::domain_error("eigendecomposition failed");
  const Vector& mu = solver.eigenvalues();
  double hi = mu.maxCoeff();
  double lo = mu.minCoeff();
  if (!(hi > 0.0) || lo < 1e-12 * hi) {
    std::ostringstream msg;
    msg << "matrix is not positive definite: eigenvalues in [" << lo << ", " << hi << "]";
    throw std::domain_error(msg.str());
  }
  return {mu, solver.eigenvectors()};
}

}  // namespace

SymMatrix::SymMatrix(int dim) : m_(Matrix::Zero(dim, dim)) {
  if (dim < 1) throw std::invalid_argument("SymMatrix dimension must be positive");
}

SymMatrix SymMatrix::identity(int dim) {
  SymMatrix s(dim);
  s.m_.setIdentity();
  return s;
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
  SymMatrix s(static_cast<int>(diag.size()));
  s.m_.diagonal() = diag;
  return s;
}

SymMatrix SymMatrix::from_dense(const Matrix& m, double tol) {
  if (m.rows() != m.cols() || m.rows() < 1) throw std::invalid_argument("from_dense: matrix must be square");
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale)
    throw std::invalid_argument("from_dense: matrix is not symmetric");
  SymMatrix s(static_cast<int>(m.rows()));
  s.m_ = 0.5 * (m + m.transpose());
  return s;
}

SymMatrix SymMatrix::scaled(double factor) const {
  SymMatrix s(*this);
  s.m_ *= factor;
  return s;
}

SymMatrix elementary_direction(int dim, int l, int lp) {
  if (l < 0 || lp < 0 || l >= dim || lp >= dim) throw std::out_of_range("elementary_direction: index out of range");
  SymMatrix e(dim);
  e.set(l, lp, 1.0);
  return e;
}

SymMatrix sqrt_spd(const SymMatrix& m) {
  Spectrum sp = checked_spectrum(m);
  Matrix r = sp.vectors * sp.values.cwiseSqrt().asDiagonal() * sp.vectors.transpose();
  return SymMatrix::from_dense(0.5 * (r + r.transpose()));
}

SymMatrix sqrt_frechet_derivative(const SymMatrix& m, const SymMatrix& direction) {
  if (direction.dim() != m.dim()) throw std::invalid_argument("sqrt_frechet_derivative: dimension mismatch");
  Spectrum sp = checked_spectrum(m);
  Vector r = sp.values.cwiseSqrt();
  Matrix e = sp.vectors.transpose() * direction.dense() * sp.vectors;
  const int K = m.dim();
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) e(a, b) /= r(a) + r(b);
  Matrix d = sp.vectors * e * sp.vectors.transpose();
  return SymMatrix::from_dense(0.5 * (d + d.transpose()));
}

SymMatrix sqrt_frechet_derivative(const SymMatrix& m, int l, int lp) {
  if (l > lp) throw std::invalid_argument("sqrt_frechet_derivative: expected l <= l'");
  return sqrt_frechet_derivative(m, elementary_direction(m.dim(), l, lp));
}

bool strictly_diagonally_dominant_positive(const SymMatrix& m) {
  const int K = m.dim();
  for (int i = 0; i < K; ++i) {
    double off = 0.0;
    for (int j = 0; j < K; ++j) {
      if (!(m(i, j) > 0.0)) return false;
      if (j != i) off += std::abs(m(i, j));
    }
    if (!(m(i, i) > off)) return false;
  }
  return true;
}

bool in_snr_domain(const SymMatrix& base) {
  const int K = base.dim();
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      double v = base(i, j);
      if (i == j) {
        if (!(v > 2.0 * K && v < 2.0 * K + 1.0)) return false;
      } else if (!(v > 1.0 && v < 2.0)) {
        return false;
      }
    }
  }
  return true;
}

SnrMatrix::SnrMatrix(double scale, SymMatrix base) : scale_(scale), base_(std::move(base)) {
  if (!(scale_ > 0.0)) throw std::invalid_argument("SnrMatrix: scale must be positive");
  if (!in_snr_domain(base_)) throw std::invalid_argument("SnrMatrix: base matrix is outside D_K");
  value_ = base_.scaled(scale_);
  sqrt_ = sqrt_spd(value_);
}

SnrMatrix SnrMatrix::general(const SymMatrix& lambda) {
  SnrMatrix s;
  s.scale_ = 1.0;
  s.base_ = lambda;
  s.value_ = lambda;
  s.sqrt_ = sqrt_spd(lambda);
  s.in_domain_ = in_snr_domain(lambda);
  return s;
}

namespace {

double open_uniform(Rng& rng, double lo, double hi) {
  double v = rng.uniform(lo, hi);
  while (v <= lo) v = rng.uniform(lo, hi);
  return v;
}

}  // namespace

SnrMatrix sample_snr(int K, double s_n, Rng& rng) {
  if (K < 1) throw std::invalid_argument("sample_snr: K must be >= 1");
  if (!(s_n > 0.0)) throw std::invalid_argument("sample_snr: s_n must be positive");
  SymMatrix base(K);
  for (int i = 0; i < K; ++i) {
    for (int j = i; j < K; ++j) {
      if (i == j)
        base.set(i, i, open_uniform(rng, 2.0 * K, 2.0 * K + 1.0));
      else
        base.set(i, j, open_uniform(rng, 1.0, 2.0));
    }
  }
  return SnrMatrix(s_n, std::move(base));
}

}  // namespace mmselab
