#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mmselab/matrix_core.hpp"
#include "mmselab/rng.hpp"

namespace mmselab {

/// sign with the tie convention sign(0) := +1, shared by teacher and student.
inline double sign_pos(double v) { return v >= 0.0 ? 1.0 : -1.0; }

/// Output channel p_out(y | a) acting on a K-dimensional activation a.
/// Posteriors need the exact pointwise log-density, not only a sampler;
/// deterministic channels report 0 / -inf.
class OutputKernel {
 public:
  virtual ~OutputKernel() = default;

  virtual std::string name() const = 0;
  virtual int out_dim(int K) const = 0;
  virtual Vector sample(const Vector& activation, Rng& rng) const = 0;
  virtual double log_density(const Vector& y, const Vector& activation) const = 0;
  virtual bool deterministic() const = 0;
  /// All possible outputs when the output alphabet is finite, else empty.
  virtual std::vector<Vector> finite_outputs(int /*K*/) const { return {}; }
};

using KernelPtr = std::shared_ptr<const OutputKernel>;

struct KernelSpec {
  std::string name = "committee";  // committee | noisy_sign | gaussian | identity
  double flip = 0.0;               // label-flip probability (committee, noisy_sign)
  double sigma = 1.0;              // gaussian noise level
  std::vector<double> readout;     // gaussian readout w; empty means all ones
};

/// Throws std::invalid_argument on unknown names or bad parameters.
KernelPtr make_kernel(const KernelSpec& spec, int K);

/// y = sign(sum_k sign(a_k)), flipped with probability `flip`.
KernelPtr committee_kernel(double flip = 0.0);
/// y_k = sign(a_k), each entry flipped independently with probability `flip`.
KernelPtr noisy_sign_kernel(double flip);
/// y = w . a + sigma * xi.
KernelPtr gaussian_kernel(Vector readout, double sigma);
/// y = a.
KernelPtr identity_kernel();

}  // namespace mmselab
