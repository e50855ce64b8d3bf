#include "mmselab/gibbs.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmselab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

/// Row-conditional likelihood: ln P_out(data | x with row i set to v), up to
/// terms that do not depend on row i. prepare() is called before the
/// candidates of row i are scored, commit() after the row changes.
class RowEngine {
 public:
  virtual ~RowEngine() = default;
  virtual void reset(const SignalMatrix&) {}
  virtual void prepare(int, const SignalMatrix&) {}
  virtual double row_log_lik(int i, const RowVector& v) = 0;
  virtual void commit(int, const RowVector&, const RowVector&) {}
};

namespace {

class NullEngine final : public RowEngine {
 public:
  double row_log_lik(int, const RowVector&) override { return 0.0; }
};

/// Order-2 tensor: keeps G = sum_j x_j^T x_j so that a row costs O(nK).
class Tensor2Engine final : public RowEngine {
 public:
  explicit Tensor2Engine(const SymTensor& y) : y_(y.dense2()), sqrt_n_(std::sqrt(static_cast<double>(y.n()))) {}

  void reset(const SignalMatrix& x) override { gram_ = x.transpose() * x; }

  void prepare(int i, const SignalMatrix& x) override {
    h_ = y_.row(i) * x - y_(i, i) * x.row(i);
    rest_ = gram_ - x.row(i).transpose() * x.row(i);
    diag_ = y_(i, i);
  }

  double row_log_lik(int, const RowVector& v) override {
    const double n = sqrt_n_ * sqrt_n_;
    double sq = v.squaredNorm();
    double quad = (v * rest_ * v.transpose())(0, 0);
    return v.dot(h_) / sqrt_n_ - quad / (2.0 * n) + diag_ * sq / sqrt_n_ - sq * sq / (2.0 * n);
  }

  void commit(int, const RowVector& old, const RowVector& v) override {
    gram_ += v.transpose() * v - old.transpose() * old;
  }

 private:
  const Matrix& y_;
  double sqrt_n_;
  Matrix gram_;
  Matrix rest_;
  RowVector h_;
  double diag_ = 0.0;
};

/// GLM and committee: keeps the activations theta x.
class GlmEngine final : public RowEngine {
 public:
  GlmEngine(const Matrix& theta, const Matrix& labels, KernelPtr kernel)
      : theta_(theta), labels_(labels), kernel_(std::move(kernel)) {}

  void reset(const SignalMatrix& x) override { acts_ = activations(theta_, x); }

  void prepare(int i, const SignalMatrix& x) override { current_ = x.row(i); }

  double row_log_lik(int i, const RowVector& v) override {
    RowVector d = v - current_;
    double lp = 0.0;
    Vector a(acts_.cols());
    Vector y(labels_.cols());
    for (Eigen::Index mu = 0; mu < acts_.rows(); ++mu) {
      a = (acts_.row(mu) + theta_(mu, i) * d).transpose();
      y = labels_.row(mu).transpose();
      lp += kernel_->log_density(y, a);
      if (lp == kNegInf) return kNegInf;
    }
    return lp;
  }

  void commit(int i, const RowVector& old, const RowVector& v) override {
    acts_ += theta_.col(i) * (v - old);
  }

 private:
  const Matrix& theta_;
  const Matrix& labels_;
  KernelPtr kernel_;
  Matrix acts_;
  RowVector current_;
};

/// Anything else: full recomputation on a private copy of x.
class GenericEngine final : public RowEngine {
 public:
  explicit GenericEngine(const QuenchedInstance& inst) : inst_(inst) {}

  void reset(const SignalMatrix& x) override { x_ = x; }

  double row_log_lik(int i, const RowVector& v) override {
    RowVector keep = x_.row(i);
    x_.row(i) = v;
    double ll = log_likelihood(x_, inst_);
    x_.row(i) = keep;
    return ll;
  }

  void commit(int i, const RowVector&, const RowVector& v) override { x_.row(i) = v; }

 private:
  const QuenchedInstance& inst_;
  SignalMatrix x_;
};

std::unique_ptr<RowEngine> make_engine(const QuenchedInstance& inst) {
  const ModelSpec& spec = *inst.model;
  const BaseData& data = inst.observation.base;
  return std::visit(
      Overloaded{[](const NoBaseModel&) -> std::unique_ptr<RowEngine> { return std::make_unique<NullEngine>(); },
                 [&](const SpikedTensorModel& m) -> std::unique_ptr<RowEngine> {
                   if (m.order == 2) return std::make_unique<Tensor2Engine>(std::get<SymTensor>(data));
                   return std::make_unique<GenericEngine>(inst);
                 },
                 [&](const GlmModel& m) -> std::unique_ptr<RowEngine> {
                   return std::make_unique<GlmEngine>(inst.hyper.weights[0], std::get<Matrix>(data), m.impl);
                 },
                 [&](const CommitteeModel&) -> std::unique_ptr<RowEngine> {
                   return std::make_unique<GlmEngine>(inst.hyper.weights[0], std::get<Matrix>(data), committee_kernel(0.0));
                 },
                 [&](const MultiLayerModel&) -> std::unique_ptr<RowEngine> {
                   return std::make_unique<GenericEngine>(inst);
                 }},
      spec.base);
}

// beta * term, with 0 * (-inf) read as 0 so that beta = 0 samples the prior.
double tempered(double beta, double term) { return beta == 0.0 ? 0.0 : beta * term; }

}  // namespace

GibbsChain::GibbsChain(const QuenchedInstance& inst, std::uint64_t seed, double beta)
    : inst_(&inst), rng_(seed), beta_(beta) {
  if (inst.model->generative)
    throw std::invalid_argument("Gibbs sampling does not support generative priors; use exact enumeration");
  if (!(beta >= 0.0)) throw std::invalid_argument("GibbsChain: beta must be non-negative");
  step_ = 0.0;
  const int kMaxTries = 10000;
  for (int t = 0; t < kMaxTries; ++t) {
    SignalMatrix x = sample_prior(inst.model->prior, inst.n(), rng_);
    double ll = log_likelihood(x, inst);
    if (beta == 0.0 || ll != kNegInf) {
      x_ = std::move(x);
      init_engine();
      return;
    }
  }
  throw std::runtime_error("GibbsChain: no prior draw with positive posterior weight after 10000 attempts");
}

GibbsChain::GibbsChain(const QuenchedInstance& inst, SignalMatrix initial, std::uint64_t seed, double beta)
    : inst_(&inst), x_(std::move(initial)), rng_(seed), beta_(beta) {
  if (inst.model->generative)
    throw std::invalid_argument("Gibbs sampling does not support generative priors; use exact enumeration");
  if (!(beta >= 0.0)) throw std::invalid_argument("GibbsChain: beta must be non-negative");
  if (x_.rows() != inst.n() || x_.cols() != inst.K()) throw std::invalid_argument("GibbsChain: initial state shape mismatch");
  if (log_prior(x_, inst) == kNegInf || (beta > 0.0 && log_likelihood(x_, inst) == kNegInf))
    throw std::invalid_argument("GibbsChain: initial state has zero posterior weight");
  init_engine();
}

void GibbsChain::set_beta(double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("GibbsChain: beta must be non-negative");
  if (beta > 0.0 && log_likelihood(x_, *inst_) == kNegInf)
    throw std::invalid_argument("GibbsChain: current state has zero likelihood");
  beta_ = beta;
}

void GibbsChain::configure(const ChainConfig& config) {
  if (!(config.initial_step > 0.0) || !(config.target_acceptance > 0.0 && config.target_acceptance < 1.0))
    throw std::invalid_argument("GibbsChain: invalid random-walk settings");
  target_ = config.target_acceptance;
  if (!inst_->model->prior.is_discrete()) step_ = config.initial_step * inst_->model->prior.S();
}

GibbsChain::~GibbsChain() = default;
GibbsChain::GibbsChain(GibbsChain&&) noexcept = default;
GibbsChain& GibbsChain::operator=(GibbsChain&&) noexcept = default;

void GibbsChain::init_engine() {
  engine_ = make_engine(*inst_);
  const ModelSpec& spec = *inst_->model;
  if (std::holds_alternative<CommitteeModel>(spec.base)) hard_constraints_ = true;
  if (const auto* g = std::get_if<GlmModel>(&spec.base)) hard_constraints_ = g->impl->deterministic();
  if (const auto* m = std::get_if<MultiLayerModel>(&spec.base))
    for (const auto& l : m->layers) hard_constraints_ = hard_constraints_ || l.impl->deterministic();
  if (!inst_->model->prior.is_discrete()) step_ = ChainConfig{}.initial_step * inst_->model->prior.S();
}

double GibbsChain::acceptance_rate() const {
  if (inst_->model->prior.is_discrete()) return 1.0;
  return proposals_ > 0 ? static_cast<double>(accepted_) / static_cast<double>(proposals_) : 0.0;
}

void GibbsChain::sweep(bool adapt) {
  const QuenchedInstance& inst = *inst_;
  const PriorSpec& prior = inst.model->prior;
  const int n = inst.n();
  const int K = inst.K();

  // Side-channel row term: -1/2 v lambda v^T + v . (Y lambda^{1/2})_i.
  const bool side = inst.has_side_channel();
  Matrix lambda;
  SignalMatrix field;
  if (side) {
    lambda = inst.observation.snr->value().dense();
    field = inst.observation.side * inst.observation.snr->sqrt().dense();
  }
  auto side_term = [&](int i, const RowVector& v) {
    if (!side) return 0.0;
    return -0.5 * (v * lambda * v.transpose())(0, 0) + v.dot(field.row(i));
  };

  engine_->reset(x_);
  long sweep_props = 0;
  long sweep_acc = 0;

  if (prior.is_discrete()) {
    const int A = prior.support_size();
    std::vector<double> lw(static_cast<std::size_t>(A));
    std::vector<RowVector> atoms;
    for (int a = 0; a < A; ++a) atoms.push_back(prior.atom(a).transpose());
    for (int i = 0; i < n; ++i) {
      engine_->prepare(i, x_);
      double hi = kNegInf;
      for (int a = 0; a < A; ++a) {
        double ll = engine_->row_log_lik(i, atoms[a]);
        double w = (ll == kNegInf && beta_ > 0.0) ? kNegInf : prior.log_prob(a) + tempered(beta_, ll + side_term(i, atoms[a]));
        lw[a] = w;
        if (w > hi) hi = w;
      }
      if (hi == kNegInf) throw std::runtime_error("GibbsChain: every value of row " + std::to_string(i) + " has zero weight");
      double total = 0.0;
      for (double& w : lw) {
        w = std::exp(w - hi);
        total += w;
      }
      double u = rng_.uniform() * total;
      int pick = A - 1;
      for (int a = 0; a < A; ++a) {
        u -= lw[a];
        if (u < 0.0) {
          pick = a;
          break;
        }
      }
      // skip zero-weight atoms that rounding could land on
      while (lw[pick] == 0.0) pick = (pick + A - 1) % A;
      if (atoms[pick] != x_.row(i)) {
        RowVector old = x_.row(i);
        x_.row(i) = atoms[pick];
        engine_->commit(i, old, atoms[pick]);
      }
    }
  } else {
    const double S = prior.S();
    for (int i = 0; i < n; ++i) {
      engine_->prepare(i, x_);
      RowVector cur = x_.row(i);
      RowVector prop(K);
      for (int k = 0; k < K; ++k) prop(k) = cur(k) + step_ * rng_.normal();
      ++sweep_props;
      if (prop.cwiseAbs().maxCoeff() > S) continue;
      double lc = engine_->row_log_lik(i, cur);
      double lp = engine_->row_log_lik(i, prop);
      if (lp == kNegInf && beta_ > 0.0) continue;
      double delta = tempered(beta_, (lp + side_term(i, prop)) - (lc + side_term(i, cur)));
      if (std::log(rng_.uniform()) < delta) {
        x_.row(i) = prop;
        engine_->commit(i, cur, prop);
        ++sweep_acc;
      }
    }
    if (adapt) {
      double rate = static_cast<double>(sweep_acc) / static_cast<double>(sweep_props);
      double gain = 1.0 / std::sqrt(1.0 + static_cast<double>(sweeps_));
      step_ = std::min(2.0 * S, step_ * std::exp(gain * (rate - target_)));
    } else {
      proposals_ += sweep_props;
      accepted_ += sweep_acc;
    }
  }
  if (hard_constraints_) global_move();
  ++sweeps_;
}

// Independence proposal from the prior, accepted by Metropolis-Hastings (the
// prior cancels). With hard label constraints the consistent set can split
// into pieces that single-row moves never connect; this move joins them.
void GibbsChain::global_move() {
  const QuenchedInstance& inst = *inst_;
  SignalMatrix prop = sample_prior(inst.model->prior, inst.n(), rng_);
  double lp = log_likelihood(prop, inst);
  if (lp == kNegInf && beta_ > 0.0) return;
  double lc = log_likelihood(x_, inst);
  double delta = tempered(beta_, (lp - side_hamiltonian(prop, inst)) - (lc - side_hamiltonian(x_, inst)));
  if (std::log(rng_.uniform()) < delta) {
    x_ = std::move(prop);
    engine_->reset(x_);
  }
}

void gibbs_sweep(GibbsChain& chain) { chain.sweep(false); }

double batch_means_se(const std::vector<double>& series, int batches) {
  const std::size_t N = series.size();
  if (N < 2) return 0.0;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(N);
  std::size_t size = N / static_cast<std::size_t>(batches);
  if (batches < 4 || size < 1) {
    double ss = 0.0;
    for (double v : series) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(N - 1) / static_cast<double>(N));
  }
  std::vector<double> means(static_cast<std::size_t>(batches), 0.0);
  for (int b = 0; b < batches; ++b) {
    for (std::size_t j = 0; j < size; ++j) means[b] += series[b * size + j];
    means[b] /= static_cast<double>(size);
  }
  double bm = 0.0;
  for (double v : means) bm += v;
  bm /= batches;
  double ss = 0.0;
  for (double v : means) ss += (v - bm) * (v - bm);
  return std::sqrt(ss / (batches - 1) / batches);
}

ReplicaSet sample_replicas(const QuenchedInstance& inst, int count, const ChainConfig& config, std::uint64_t seed,
                           double beta) {
  if (count < 1) throw std::invalid_argument("sample_replicas: need at least one replica");
  if (config.burn_in < 0 || config.kept_sweeps < 1 || config.thinning < 1)
    throw std::invalid_argument("sample_replicas: invalid chain budget");
  ReplicaSet set;
  std::vector<double> means;
  std::vector<double> ses;
  for (int r = 0; r < count; ++r) {
    GibbsChain chain(inst, derive_seed(seed, {static_cast<std::uint64_t>(r)}), beta);
    chain.configure(config);
    for (int s = 0; s < config.burn_in; ++s) chain.sweep(true);
    ReplicaSamples rs;
    std::vector<double> norms;
    for (int s = 1; s <= config.kept_sweeps; ++s) {
      chain.sweep(false);
      if (s % config.thinning == 0) {
        rs.samples.push_back(chain.state());
        norms.push_back(chain.state().squaredNorm());
      }
    }
    rs.acceptance = chain.acceptance_rate();
    rs.step = chain.step();
    double m = 0.0;
    for (double v : norms) m += v;
    means.push_back(norms.empty() ? 0.0 : m / static_cast<double>(norms.size()));
    ses.push_back(batch_means_se(norms));
    set.replicas.push_back(std::move(rs));
  }
  for (int a = 0; a < count; ++a)
    for (int b = a + 1; b < count; ++b) {
      double diff = std::abs(means[a] - means[b]);
      double se = std::sqrt(ses[a] * ses[a] + ses[b] * ses[b]);
      if (diff > 5.0 * se && diff > 1e-12 * (1.0 + std::abs(means[a]))) {
        set.converged = false;
        set.diagnostic = "replicas " + std::to_string(a) + " and " + std::to_string(b) +
                         " disagree on <||x||^2>: " + std::to_string(means[a]) + " vs " + std::to_string(means[b]);
      }
    }
  return set;
}

}  // namespace mmselab
