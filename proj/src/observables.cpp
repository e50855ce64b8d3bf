#include "mmselab/observables.hpp"

#include <stdexcept>

namespace mmselab {

Matrix overlap(const SignalMatrix& truth, const SignalMatrix& x) {
  if (truth.rows() != x.rows() || truth.cols() != x.cols()) throw std::invalid_argument("overlap: shape mismatch");
  return truth.transpose() * x / static_cast<double>(x.rows());
}

Matrix overlap_replica(const SignalMatrix& x, const SignalMatrix& xp) {
  if (xp.rows() != x.rows() || xp.cols() != x.cols()) throw std::invalid_argument("overlap_replica: shape mismatch");
  return x.transpose() * xp / static_cast<double>(x.rows());
}

LMatrixBuilder::LMatrixBuilder(const QuenchedInstance& inst) : inst_(inst) {
  if (!inst.has_side_channel()) throw std::invalid_argument("l_matrix: instance has no side channel");
  const SymMatrix& lambda = inst.observation.snr->value();
  const int K = lambda.dim();
  for (int l = 0; l < K; ++l)
    for (int lp = l; lp < K; ++lp) derivs_.push_back(sqrt_frechet_derivative(lambda, l, lp));
}

SymMatrix LMatrixBuilder::operator()(const SignalMatrix& x) const {
  const int K = inst_.K();
  if (x.rows() != inst_.n() || x.cols() != K) throw std::invalid_argument("l_matrix: shape mismatch");
  const double n = static_cast<double>(x.rows());
  Matrix gram = x.transpose() * x;
  Matrix cross = inst_.signal.transpose() * x;
  Matrix noise = inst_.noise.transpose() * x;
  SymMatrix L(K);
  std::size_t d = 0;
  for (int l = 0; l < K; ++l) {
    for (int lp = l; lp < K; ++lp, ++d) {
      // Tr(Z^T x D) = sum_ab (Z^T x)_ab D_ba
      double zd = noise.cwiseProduct(derivs_[d].dense().transpose()).sum();
      double v = l == lp ? 0.5 * gram(l, l) - cross(l, l) - zd : gram(l, lp) - cross(l, lp) - cross(lp, l) - zd;
      L.set(l, lp, v / n);
    }
  }
  return L;
}

SymMatrix l_matrix(const SignalMatrix& x, const QuenchedInstance& inst) { return LMatrixBuilder(inst)(x); }

std::vector<double> upper_entries(const Matrix& m) {
  std::vector<double> out;
  for (Eigen::Index l = 0; l < m.rows(); ++l)
    for (Eigen::Index lp = l; lp < m.cols(); ++lp) out.push_back(m(l, lp));
  return out;
}

}  // namespace mmselab
