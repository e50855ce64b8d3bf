#include "mmselab/models.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mmselab/numeric.hpp"

namespace mmselab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double binomial(int n, int k) {
  if (k < 0 || n < k) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

Matrix draw_weights(WeightDist dist, int rows, int cols, Rng& rng) {
  Matrix w(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) w(r, c) = dist == WeightDist::Gaussian ? rng.normal() : (rng.bernoulli(0.5) ? 1.0 : -1.0);
  return w;
}

/// Decodes `code` in base |alphabet| into an n x K configuration.
SignalMatrix decode_config(std::size_t code, int n, const std::vector<Vector>& alphabet) {
  const std::size_t A = alphabet.size();
  SignalMatrix x(n, alphabet.front().size());
  for (int i = 0; i < n; ++i) {
    x.row(i) = alphabet[code % A].transpose();
    code /= A;
  }
  return x;
}

std::size_t checked_power(std::size_t base, int exponent, std::size_t cap, const char* what) {
  std::size_t total = 1;
  for (int i = 0; i < exponent; ++i) {
    if (total > cap / base) {
      std::ostringstream msg;
      msg << what << ": " << base << "^" << exponent << " configurations exceed the enumeration cap " << cap;
      throw std::length_error(msg.str());
    }
    total *= base;
  }
  return total;
}

double rows_log_density(const OutputKernel& kernel, const Matrix& outputs, const Matrix& acts) {
  double lp = 0.0;
  for (Eigen::Index r = 0; r < outputs.rows(); ++r) {
    lp += kernel.log_density(outputs.row(r).transpose(), acts.row(r).transpose());
    if (lp == kNegInf) return kNegInf;
  }
  return lp;
}

double tensor_log_likelihood(const SignalMatrix& x, const SymTensor& y) {
  if (y.n() != x.rows()) throw std::invalid_argument("tensor likelihood: size mismatch");
  const double n = static_cast<double>(x.rows());
  if (y.order() == 2) {
    const Matrix& obs = y.dense2();
    Matrix gram = x * x.transpose();
    double total = 0.0;
    const Eigen::Index N = x.rows();
    for (Eigen::Index j = 0; j < N; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        double m = gram(i, j) / std::sqrt(n);
        total += obs(i, j) * m - 0.5 * m * m;
      }
    }
    return total;
  }
  double total = 0.0;
  for (std::size_t e = 0; e < y.size(); ++e) {
    double m = tensor_mean_entry(x, y.tuple(e));
    total += y.value(e) * m - 0.5 * m * m;
  }
  return total;
}

double multilayer_log_likelihood(const SignalMatrix& x0, const MultiLayerModel& model, const Hyper& hyper,
                                 const LayerStack& stack) {
  const std::size_t L = model.layers.size();
  std::vector<SignalMatrix> prev{x0};
  std::vector<double> prev_lp{0.0};
  for (std::size_t l = 0; l + 1 < L; ++l) {
    const OutputKernel& kernel = *model.layers[l].impl;
    const Matrix& theta = hyper.weights[l];
    std::vector<Vector> alphabet = kernel.finite_outputs(static_cast<int>(x0.cols()));
    const int width = static_cast<int>(theta.rows());
    std::size_t count = checked_power(alphabet.size(), width, kHiddenEnumerationCap, "hidden layer");
    if (count * prev.size() > kHiddenEnumerationCap) throw std::length_error("hidden layers exceed the enumeration cap");

    std::vector<Matrix> acts;
    acts.reserve(prev.size());
    for (const auto& p : prev) acts.push_back(activations(theta, p));

    std::vector<SignalMatrix> next;
    std::vector<double> next_lp;
    for (std::size_t code = 0; code < count; ++code) {
      SignalMatrix cfg = decode_config(code, width, alphabet);
      LogSumExp acc;
      for (std::size_t p = 0; p < prev.size(); ++p) {
        if (prev_lp[p] == kNegInf) continue;
        acc.add(prev_lp[p] + rows_log_density(kernel, cfg, acts[p]));
      }
      double lp = acc.value();
      if (lp == kNegInf) continue;
      next.push_back(std::move(cfg));
      next_lp.push_back(lp);
    }
    prev = std::move(next);
    prev_lp = std::move(next_lp);
  }
  const OutputKernel& last = *model.layers.back().impl;
  LogSumExp acc;
  for (std::size_t p = 0; p < prev.size(); ++p)
    acc.add(prev_lp[p] + rows_log_density(last, stack.data, activations(hyper.weights.back(), prev[p])));
  return acc.value();
}

double generative_log_prior(const SignalMatrix& x, const ModelSpec& model, const Hyper& hyper) {
  const PriorSpec& input = model.prior;
  if (!input.is_discrete()) throw std::invalid_argument("generative prior needs a discrete input prior");
  const int n0 = static_cast<int>(hyper.generative_weights.cols());
  const std::size_t A = static_cast<std::size_t>(input.support_size());
  std::size_t count = checked_power(A, n0, kHiddenEnumerationCap, "generative prior input");
  std::vector<Vector> atoms;
  for (int a = 0; a < input.support_size(); ++a) atoms.push_back(input.atom(a));
  const OutputKernel& kernel = *model.generative->impl;
  LogSumExp acc;
  for (std::size_t code = 0; code < count; ++code) {
    double lp = 0.0;
    std::size_t c = code;
    for (int i = 0; i < n0; ++i) {
      lp += input.log_prob(static_cast<int>(c % A));
      c /= A;
    }
    SignalMatrix x0 = decode_config(code, n0, atoms);
    acc.add(lp + rows_log_density(kernel, x, activations(hyper.generative_weights, x0)));
  }
  return acc.value();
}

}  // namespace

// ---------------------------------------------------------------- SymTensor

SymTensor::SymTensor(int n, int order) : n_(n), order_(order) {
  if (n < 1) throw std::invalid_argument("SymTensor: n must be >= 1");
  if (order < 2) throw std::invalid_argument("SymTensor: order must be >= 2");
  std::vector<int> t(static_cast<std::size_t>(order), 0);
  while (true) {
    tuples_.insert(tuples_.end(), t.begin(), t.end());
    int j = order - 1;
    while (j >= 0 && t[static_cast<std::size_t>(j)] == n - 1) --j;
    if (j < 0) break;
    int v = t[static_cast<std::size_t>(j)] + 1;
    for (int q = j; q < order; ++q) t[static_cast<std::size_t>(q)] = v;
  }
  values_.assign(tuples_.size() / static_cast<std::size_t>(order), 0.0);
  if (order == 2) dense2_ = Matrix::Zero(n, n);
}

void SymTensor::set_value(std::size_t e, double v) {
  values_[e] = v;
  if (order_ == 2) {
    auto t = tuple(e);
    dense2_(t[0], t[1]) = v;
    dense2_(t[1], t[0]) = v;
  }
}

std::size_t SymTensor::index_of(std::span<const int> sorted) const {
  if (static_cast<int>(sorted.size()) != order_) throw std::invalid_argument("index_of: wrong tuple length");
  double rank = 0.0;
  int lo = 0;
  for (int j = 0; j < order_; ++j) {
    int tj = sorted[static_cast<std::size_t>(j)];
    if (tj < lo || tj >= n_) throw std::invalid_argument("index_of: tuple is not nondecreasing or out of range");
    int rest = order_ - j - 1;
    for (int v = lo; v < tj; ++v) rank += binomial(n_ - v + rest - 1, rest);
    lo = tj;
  }
  return static_cast<std::size_t>(rank);
}

const Matrix& SymTensor::dense2() const {
  if (order_ != 2) throw std::logic_error("dense2: tensor order is not 2");
  return dense2_;
}

double tensor_mean_entry(const SignalMatrix& x, std::span<const int> tuple) {
  const double n = static_cast<double>(x.rows());
  const int p = static_cast<int>(tuple.size());
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    double prod = 1.0;
    for (int i : tuple) prod *= x(i, k);
    sum += prod;
  }
  return std::pow(n, 0.5 * (1.0 - p)) * sum;
}

SymTensor tensor_mean(const SignalMatrix& x, int order) {
  SymTensor t(static_cast<int>(x.rows()), order);
  for (std::size_t e = 0; e < t.size(); ++e) t.set_value(e, tensor_mean_entry(x, t.tuple(e)));
  return t;
}

SymTensor tensor_forward(const SignalMatrix& x, int order, Rng& rng) {
  if (order < 2) throw std::invalid_argument("tensor_forward: order must be >= 2");
  SymTensor t(static_cast<int>(x.rows()), order);
  for (std::size_t e = 0; e < t.size(); ++e) t.set_value(e, tensor_mean_entry(x, t.tuple(e)) + rng.normal());
  return t;
}

// ------------------------------------------------------------ GLM family

Matrix activations(const Matrix& theta, const SignalMatrix& x) {
  if (theta.cols() != x.rows()) {
    std::ostringstream msg;
    msg << "weight matrix has " << theta.cols() << " columns but signal has " << x.rows() << " rows";
    throw std::invalid_argument(msg.str());
  }
  return theta * x;
}

Matrix glm_forward(const SignalMatrix& x, const Matrix& theta, const OutputKernel& kernel, Rng& rng) {
  Matrix acts = activations(theta, x);
  const int K = static_cast<int>(x.cols());
  Matrix labels(acts.rows(), kernel.out_dim(K));
  for (Eigen::Index mu = 0; mu < acts.rows(); ++mu) labels.row(mu) = kernel.sample(acts.row(mu).transpose(), rng).transpose();
  return labels;
}

Vector committee_forward(const SignalMatrix& x, const Matrix& theta) {
  Matrix acts = activations(theta, x);
  Vector labels(acts.rows());
  for (Eigen::Index mu = 0; mu < acts.rows(); ++mu) {
    double vote = 0.0;
    for (Eigen::Index k = 0; k < acts.cols(); ++k) vote += sign_pos(acts(mu, k));
    labels(mu) = sign_pos(vote);
  }
  return labels;
}

LayerStack multilayer_forward(const SignalMatrix& x0, const std::vector<Layer>& layers, Rng& rng) {
  if (layers.empty()) throw std::invalid_argument("multilayer_forward: need at least one layer");
  LayerStack stack;
  SignalMatrix current = x0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weights.cols() != current.rows()) {
      std::ostringstream msg;
      msg << "multilayer_forward: width mismatch at layer " << l + 1;
      throw std::invalid_argument(msg.str());
    }
    Matrix out = glm_forward(current, layers[l].weights, *layers[l].kernel, rng);
    if (l + 1 == layers.size()) {
      stack.data = out;
    } else {
      current = out;
      stack.hidden.push_back(current);
    }
  }
  return stack;
}

// ------------------------------------------------------------ side channel

SignalMatrix perturb_with_noise(const SignalMatrix& x, const SnrMatrix& snr, const SignalMatrix& noise) {
  if (x.cols() != snr.dim() || noise.rows() != x.rows() || noise.cols() != x.cols())
    throw std::invalid_argument("perturb: shape mismatch");
  return x * snr.sqrt().dense() + noise;
}

std::pair<SignalMatrix, SignalMatrix> perturb(const SignalMatrix& x, const SnrMatrix& snr, Rng& rng) {
  SignalMatrix z(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index k = 0; k < z.cols(); ++k) z(i, k) = rng.normal();
  return {perturb_with_noise(x, snr, z), z};
}

// ------------------------------------------------------------ model spec

std::string ModelSpec::variant_name() const {
  return std::visit(Overloaded{[](const NoBaseModel&) { return std::string("none"); },
                               [](const SpikedTensorModel& m) { return "spiked_tensor(p=" + std::to_string(m.order) + ")"; },
                               [](const GlmModel&) { return std::string("glm"); },
                               [](const CommitteeModel&) { return std::string("committee"); },
                               [](const MultiLayerModel& m) { return "multilayer(L=" + std::to_string(m.layers.size()) + ")"; }},
                    base);
}

std::shared_ptr<const ModelSpec> make_model(ModelSpec spec) {
  const int K = spec.K();
  std::visit(Overloaded{[](NoBaseModel&) {},
                        [](SpikedTensorModel& m) {
                          if (m.order < 2) throw std::invalid_argument("spiked tensor: order must be >= 2");
                        },
                        [K](GlmModel& m) {
                          if (!(m.alpha > 0.0)) throw std::invalid_argument("glm: alpha must be positive");
                          m.impl = make_kernel(m.kernel, K);
                        },
                        [](CommitteeModel& m) {
                          if (!(m.alpha > 0.0)) throw std::invalid_argument("committee: alpha must be positive");
                        },
                        [K](MultiLayerModel& m) {
                          if (m.layers.empty()) throw std::invalid_argument("multilayer: need at least one layer");
                          for (std::size_t l = 0; l < m.layers.size(); ++l) {
                            auto& layer = m.layers[l];
                            if (!(layer.ratio > 0.0)) throw std::invalid_argument("multilayer: ratios must be positive");
                            layer.impl = make_kernel(layer.kernel, K);
                            if (l + 1 < m.layers.size()) {
                              if (layer.impl->out_dim(K) != K || layer.impl->finite_outputs(K).empty())
                                throw std::invalid_argument(
                                    "multilayer: hidden-layer kernels must output K-vectors from a finite alphabet");
                            }
                          }
                        }},
             spec.base);
  if (spec.generative) {
    if (!std::holds_alternative<SpikedTensorModel>(spec.base))
      throw std::invalid_argument("generative prior is only supported with a spiked tensor model");
    if (!spec.prior.is_discrete()) throw std::invalid_argument("generative prior needs a discrete input prior");
    spec.generative->impl = make_kernel(spec.generative->kernel, K);
    if (spec.generative->impl->out_dim(K) != K || spec.generative->impl->finite_outputs(K).empty())
      throw std::invalid_argument("generative prior kernel must output K-vectors from a finite alphabet");
    if (!(spec.generative->input_ratio > 0.0)) throw std::invalid_argument("generative prior: ratio must be positive");
  }
  return std::make_shared<const ModelSpec>(std::move(spec));
}

int glm_rows(double alpha, int n) { return static_cast<int>(std::ceil(alpha * n - 1e-9)); }

QuenchedInstance draw_instance(std::shared_ptr<const ModelSpec> model, int n, const std::optional<SnrMatrix>& snr,
                               Rng& rng) {
  if (!model) throw std::invalid_argument("draw_instance: null model");
  if (n < 1) throw std::invalid_argument("draw_instance: n must be >= 1");
  const ModelSpec& spec = *model;
  const int K = spec.K();
  if (snr && snr->dim() != K) throw std::invalid_argument("draw_instance: SNR dimension does not match K");

  QuenchedInstance inst;
  inst.model = model;
  if (spec.generative) {
    int n0 = glm_rows(spec.generative->input_ratio, n);
    inst.hyper.generative_input = sample_prior(spec.prior, n0, rng);
    inst.hyper.generative_weights = draw_weights(spec.weights, n, n0, rng);
    Matrix out = glm_forward(inst.hyper.generative_input, inst.hyper.generative_weights, *spec.generative->impl, rng);
    inst.signal = out;
  } else {
    inst.signal = sample_prior(spec.prior, n, rng);
  }

  const SignalMatrix& x = inst.signal;
  inst.observation.base = std::visit(
      Overloaded{[](const NoBaseModel&) -> BaseData { return std::monostate{}; },
                 [&](const SpikedTensorModel& m) -> BaseData { return tensor_forward(x, m.order, rng); },
                 [&](const GlmModel& m) -> BaseData {
                   inst.hyper.weights.push_back(draw_weights(spec.weights, glm_rows(m.alpha, n), n, rng));
                   return glm_forward(x, inst.hyper.weights.back(), *m.impl, rng);
                 },
                 [&](const CommitteeModel& m) -> BaseData {
                   inst.hyper.weights.push_back(draw_weights(spec.weights, glm_rows(m.alpha, n), n, rng));
                   return Matrix(committee_forward(x, inst.hyper.weights.back()));
                 },
                 [&](const MultiLayerModel& m) -> BaseData {
                   std::vector<Layer> layers;
                   int prev = n;
                   for (const auto& lm : m.layers) {
                     int width = glm_rows(lm.ratio, n);
                     layers.push_back({draw_weights(spec.weights, width, prev, rng), lm.impl});
                     prev = width;
                   }
                   for (const auto& l : layers) inst.hyper.weights.push_back(l.weights);
                   return multilayer_forward(x, layers, rng);
                 }},
      spec.base);

  inst.noise = SignalMatrix(n, K);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k) inst.noise(i, k) = rng.normal();
  inst.observation.snr = snr;
  inst.observation.side = snr ? perturb_with_noise(x, *snr, inst.noise) : SignalMatrix(SignalMatrix::Zero(n, K));
  return inst;
}

QuenchedInstance QuenchedInstance::with_snr(const std::optional<SnrMatrix>& snr) const {
  QuenchedInstance copy = *this;
  copy.observation.snr = snr;
  copy.observation.side = snr ? perturb_with_noise(signal, *snr, noise) : SignalMatrix(SignalMatrix::Zero(n(), K()));
  return copy;
}

// ------------------------------------------------------------ log weights

double log_prior(const SignalMatrix& x, const QuenchedInstance& inst) {
  const ModelSpec& spec = *inst.model;
  if (x.rows() != inst.n() || x.cols() != inst.K()) throw std::invalid_argument("log_prior: shape mismatch");
  if (spec.generative) return generative_log_prior(x, spec, inst.hyper);
  double lp = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    lp += spec.prior.log_density(x.row(i));
    if (lp == kNegInf) return kNegInf;
  }
  return lp;
}

double log_likelihood(const SignalMatrix& x, const QuenchedInstance& inst) {
  const ModelSpec& spec = *inst.model;
  const BaseData& data = inst.observation.base;
  return std::visit(
      Overloaded{[](const NoBaseModel&) { return 0.0; },
                 [&](const SpikedTensorModel&) { return tensor_log_likelihood(x, std::get<SymTensor>(data)); },
                 [&](const GlmModel& m) {
                   return rows_log_density(*m.impl, std::get<Matrix>(data), activations(inst.hyper.weights[0], x));
                 },
                 [&](const CommitteeModel&) {
                   Vector pred = committee_forward(x, inst.hyper.weights[0]);
                   const Matrix& labels = std::get<Matrix>(data);
                   for (Eigen::Index mu = 0; mu < pred.size(); ++mu)
                     if (pred(mu) != labels(mu, 0)) return kNegInf;
                   return 0.0;
                 },
                 [&](const MultiLayerModel& m) {
                   return multilayer_log_likelihood(x, m, inst.hyper, std::get<LayerStack>(data));
                 }},
      spec.base);
}

double side_hamiltonian(const SignalMatrix& x, const QuenchedInstance& inst) {
  if (!inst.observation.snr) return 0.0;
  SignalMatrix xs = x * inst.observation.snr->sqrt().dense();
  return 0.5 * xs.squaredNorm() - inst.observation.side.cwiseProduct(xs).sum();
}

double log_posterior_weight(const SignalMatrix& x, const QuenchedInstance& inst, double beta) {
  double lp = log_prior(x, inst);
  if (lp == kNegInf) return kNegInf;
  double ll = log_likelihood(x, inst);
  if (ll == kNegInf) return kNegInf;
  return lp + beta * (ll - side_hamiltonian(x, inst));
}

}  // namespace mmselab
