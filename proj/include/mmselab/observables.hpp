#pragma once

#include <vector>

#include "mmselab/matrix_core.hpp"
#include "mmselab/models.hpp"

namespace mmselab {

/// Q = X^T x / n.
Matrix overlap(const SignalMatrix& truth, const SignalMatrix& x);

/// Q^(12) = x^T x' / n.
Matrix overlap_replica(const SignalMatrix& x, const SignalMatrix& xp);

/// Builds L(x) = (1/n) dH/dlambda at fixed (X, Z), i.e. with
/// Y = X lambda^{1/2} + Z substituted before differentiating:
///   L_{ll'} = (1/n)[ 1/2 Tr(E x^T x) - Tr(X^T x E) - Tr(Z^T x D_{ll'}) ]
/// where E is the elementary direction of (l, l') and D_{ll'} the derivative
/// of lambda^{1/2} along it. The Frechet derivatives are computed once.
class LMatrixBuilder {
 public:
  explicit LMatrixBuilder(const QuenchedInstance& inst);
  SymMatrix operator()(const SignalMatrix& x) const;

 private:
  const QuenchedInstance& inst_;
  std::vector<SymMatrix> derivs_;  // D_{ll'} for l <= l', row-major upper triangle
};

/// One-shot version of LMatrixBuilder. Requires a side channel.
SymMatrix l_matrix(const SignalMatrix& x, const QuenchedInstance& inst);

/// Upper-triangle entries (l <= l') of a symmetric K x K matrix, row-major.
std::vector<double> upper_entries(const Matrix& m);

}  // namespace mmselab
