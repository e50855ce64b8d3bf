#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mmselab/kernels.hpp"
#include "mmselab/matrix_core.hpp"
#include "mmselab/prior.hpp"
#include "mmselab/rng.hpp"

namespace mmselab {

/// Symmetric order-p tensor over n indices, stored once per index multiset
/// i_1 <= i_2 <= ... <= i_p in lexicographic order.
class SymTensor {
 public:
  SymTensor() = default;
  SymTensor(int n, int order);

  int n() const { return n_; }
  int order() const { return order_; }
  std::size_t size() const { return values_.size(); }

  std::span<const int> tuple(std::size_t e) const {
    return {tuples_.data() + e * static_cast<std::size_t>(order_), static_cast<std::size_t>(order_)};
  }
  double value(std::size_t e) const { return values_[e]; }
  void set_value(std::size_t e, double v);

  /// Position of a nondecreasing tuple in storage order.
  std::size_t index_of(std::span<const int> sorted) const;

  /// Full symmetric n x n matrix; only available for order 2.
  const Matrix& dense2() const;

 private:
  int n_ = 0;
  int order_ = 0;
  std::vector<int> tuples_;
  std::vector<double> values_;
  Matrix dense2_;
};

/// Mean part n^{(1-p)/2} sum_k x_{i_1 k} ... x_{i_p k} at one stored entry.
double tensor_mean_entry(const SignalMatrix& x, std::span<const int> tuple);

/// Noise-free tensor: only the mean part.
SymTensor tensor_mean(const SignalMatrix& x, int order);

/// Spiked tensor observation: mean part plus i.i.d. standard normal noise on
/// the index simplex.
SymTensor tensor_forward(const SignalMatrix& x, int order, Rng& rng);

/// Activations a_mu = sum_i theta_{mu i} X_i, one K-vector per row (m x K).
Matrix activations(const Matrix& theta, const SignalMatrix& x);

/// m labels (m x out_dim) drawn from `kernel` given theta X.
Matrix glm_forward(const SignalMatrix& x, const Matrix& theta, const OutputKernel& kernel, Rng& rng);

/// Deterministic committee: sign sum_k sign sum_i theta_{mu i} X_{ik}.
Vector committee_forward(const SignalMatrix& x, const Matrix& theta);

struct Layer {
  Matrix weights;  // n_l x n_{l-1}
  KernelPtr kernel;
};

struct LayerStack {
  std::vector<SignalMatrix> hidden;  // X^(1) .. X^(L-1)
  Matrix data;                       // X^(L)
};

LayerStack multilayer_forward(const SignalMatrix& x0, const std::vector<Layer>& layers, Rng& rng);

/// Side information Y = X lambda^{1/2} + Z; returns (Y, Z).
std::pair<SignalMatrix, SignalMatrix> perturb(const SignalMatrix& x, const SnrMatrix& snr, Rng& rng);
/// Same channel with a given noise realisation.
SignalMatrix perturb_with_noise(const SignalMatrix& x, const SnrMatrix& snr, const SignalMatrix& noise);

enum class WeightDist { Gaussian, Rademacher };

struct NoBaseModel {};
struct SpikedTensorModel {
  int order = 2;
};
struct GlmModel {
  double alpha = 1.0;
  KernelSpec kernel;
  KernelPtr impl;  // resolved by make_model
};
struct CommitteeModel {
  double alpha = 1.0;
};
struct LayerModel {
  double ratio = 1.0;  // n_l = ceil(ratio * n_0)
  KernelSpec kernel;
  KernelPtr impl;
};
struct MultiLayerModel {
  std::vector<LayerModel> layers;
};

using BaseModel = std::variant<NoBaseModel, SpikedTensorModel, GlmModel, CommitteeModel, MultiLayerModel>;

/// Generative prior for a spiked model: X_i ~ p_out(. | theta_i X^(0)) with
/// X^(0) drawn from the model prior, n_0 = ceil(input_ratio * n).
struct GenerativePrior {
  double input_ratio = 1.0;
  KernelSpec kernel;
  KernelPtr impl;
};

struct ModelSpec {
  PriorSpec prior = PriorSpec::rademacher(1);
  BaseModel base = NoBaseModel{};
  WeightDist weights = WeightDist::Gaussian;
  std::optional<GenerativePrior> generative;

  int K() const { return prior.K(); }
  std::string variant_name() const;
};

/// Resolves kernel specs and validates the combination. Throws
/// std::invalid_argument on inconsistent specs (e.g. a hidden layer whose
/// kernel has no finite output alphabet).
std::shared_ptr<const ModelSpec> make_model(ModelSpec spec);

using BaseData = std::variant<std::monostate, SymTensor, Matrix, LayerStack>;

struct Observation {
  BaseData base;
  SignalMatrix side;  // Y, zero when no side channel
  std::optional<SnrMatrix> snr;
};

struct Hyper {
  std::vector<Matrix> weights;  // theta_out (one per layer for multi-layer)
  SignalMatrix generative_input;  // X^(0) for a generative prior
  Matrix generative_weights;      // n x n_0
};

/// Everything fixed by one realisation of the problem. Immutable once built.
struct QuenchedInstance {
  std::shared_ptr<const ModelSpec> model;
  SignalMatrix signal;
  Hyper hyper;
  Observation observation;
  SignalMatrix noise;  // realised Z of the side channel

  int n() const { return static_cast<int>(signal.rows()); }
  int K() const { return static_cast<int>(signal.cols()); }
  bool has_side_channel() const { return observation.snr.has_value(); }

  /// Same signal, hyper-parameters, base data and Z, with the side channel
  /// rebuilt as Y = X lambda^{1/2} + Z (or removed when `snr` is empty).
  QuenchedInstance with_snr(const std::optional<SnrMatrix>& snr) const;
};

int glm_rows(double alpha, int n);

/// Samples one quenched instance: prior (or generative prior), weights,
/// base data, then the side channel when `snr` is set.
QuenchedInstance draw_instance(std::shared_ptr<const ModelSpec> model, int n, const std::optional<SnrMatrix>& snr,
                               Rng& rng);

/// ln P_0(x); -inf outside the support.
double log_prior(const SignalMatrix& x, const QuenchedInstance& inst);

/// x-dependent part of ln P_out(base data | x). For the Gaussian tensor
/// channel the data-only terms (-Y^2/2 and normalisation) are dropped, the
/// same convention the side-channel Hamiltonian uses.
double log_likelihood(const SignalMatrix& x, const QuenchedInstance& inst);

/// H_lambda(x, Y) = 1/2 ||x lambda^{1/2}||_F^2 - Tr(Y^T x lambda^{1/2}); 0 without side channel.
double side_hamiltonian(const SignalMatrix& x, const QuenchedInstance& inst);

/// ln P_0(x) + beta * (ln P_out(data | x) - H_lambda(x, Y)). beta = 1 is the
/// Bayes-optimal posterior; other values give a tempered (mismatched) one.
double log_posterior_weight(const SignalMatrix& x, const QuenchedInstance& inst, double beta = 1.0);

/// Maximum number of hidden configurations summed over when marginalising
/// hidden layers or a generative prior.
inline constexpr std::size_t kHiddenEnumerationCap = std::size_t{1} << 20;

}  // namespace mmselab
