#include "mmselab/estimators.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mmselab/observables.hpp"

namespace mmselab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MatrixEstimate entrywise(const std::vector<Matrix>& values) {
  const Eigen::Index R = values.front().rows();
  const Eigen::Index C = values.front().cols();
  MatrixEstimate out{Matrix(R, C), Matrix(R, C)};
  std::vector<double> v(values.size());
  for (Eigen::Index r = 0; r < R; ++r)
    for (Eigen::Index c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < values.size(); ++i) v[i] = values[i](r, c);
      Estimate e = mean_se(v);
      out.value(r, c) = e.value;
      out.se(r, c) = e.se;
    }
  return out;
}

void require_ensemble(const std::vector<PosteriorSummary>& ensemble) {
  if (ensemble.empty()) throw std::invalid_argument("estimator needs a non-empty ensemble");
}

}  // namespace

PosteriorSummary summarize(const QuenchedInstance& inst, const EnumeratedPosterior& post, bool with_xxt) {
  const double n = inst.n();
  PosteriorSummary s;
  s.truth = inst.signal;
  s.exact = true;
  s.mean = SignalMatrix::Zero(inst.n(), inst.K());
  s.q_mean = Matrix::Zero(inst.K(), inst.K());
  if (with_xxt) s.xxt = Matrix::Zero(inst.n(), inst.n());
  std::optional<LMatrixBuilder> lb;
  if (inst.has_side_channel()) {
    lb.emplace(inst);
    s.l_mean = Matrix::Zero(inst.K(), inst.K());
  }
  const auto& p = post.probabilities();
  for (std::size_t k = 0; k < post.size(); ++k) {
    if (p[k] == 0.0) continue;
    SignalMatrix x = post.configuration(k);
    Matrix q = inst.signal.transpose() * x / n;
    s.mean += p[k] * x;
    s.q_norm2 += p[k] * q.squaredNorm();
    if (with_xxt) s.xxt += p[k] * (x * x.transpose());
    if (lb) *s.l_mean += p[k] * (*lb)(x).dense();
  }
  s.q_mean = inst.signal.transpose() * s.mean / n;
  return s;
}

PosteriorSummary summarize(const QuenchedInstance& inst, const std::vector<SignalMatrix>& samples, bool with_xxt) {
  if (samples.empty()) throw std::invalid_argument("summarize: no samples");
  const double n = inst.n();
  const double w = 1.0 / static_cast<double>(samples.size());
  PosteriorSummary s;
  s.truth = inst.signal;
  s.mean = SignalMatrix::Zero(inst.n(), inst.K());
  if (with_xxt) s.xxt = Matrix::Zero(inst.n(), inst.n());
  std::optional<LMatrixBuilder> lb;
  if (inst.has_side_channel()) {
    lb.emplace(inst);
    s.l_mean = Matrix::Zero(inst.K(), inst.K());
  }
  for (const auto& x : samples) {
    Matrix q = inst.signal.transpose() * x / n;
    s.mean += w * x;
    s.q_norm2 += w * q.squaredNorm();
    if (with_xxt) s.xxt += w * (x * x.transpose());
    if (lb) *s.l_mean += w * (*lb)(x).dense();
  }
  s.q_mean = inst.signal.transpose() * s.mean / n;
  return s;
}

Matrix signal_second_moment(const ModelSpec& model) {
  if (model.generative) throw std::invalid_argument("signal_second_moment: not available for a generative prior");
  return model.prior.second_moment();
}

MmseEstimate matrix_mmse(const std::vector<PosteriorSummary>& ensemble, const Matrix& second_moment) {
  require_ensemble(ensemble);
  std::vector<Matrix> direct, q;
  for (const auto& s : ensemble) {
    SignalMatrix err = s.truth - s.mean;
    direct.push_back(err.transpose() * err / static_cast<double>(s.truth.rows()));
    q.push_back(s.q_mean);
  }
  MmseEstimate out;
  out.direct = entrywise(direct);
  MatrixEstimate eq = entrywise(q);
  out.overlap_form = {second_moment - eq.value, eq.se};
  return out;
}

ScalarMmseEstimate scalar_mmse(const std::vector<PosteriorSummary>& ensemble, const Matrix& second_moment) {
  MmseEstimate m = matrix_mmse(ensemble, second_moment);
  std::vector<double> direct, q;
  for (const auto& s : ensemble) {
    SignalMatrix err = s.truth - s.mean;
    direct.push_back(err.squaredNorm() / static_cast<double>(s.truth.rows()));
    q.push_back(s.q_mean.trace());
  }
  return {{m.direct.value.trace(), mean_se(direct).se}, {m.overlap_form.value.trace(), mean_se(q).se}};
}

TensorMseEstimate tensor_mse(const std::vector<PosteriorSummary>& ensemble, const Matrix& second_moment) {
  require_ensemble(ensemble);
  // E[(X_1^T X_2)^2] = ||E X_1 X_1^T||_F^2 for independent rows
  const double cross = second_moment.squaredNorm();
  std::vector<double> lhs, rhs, gap;
  for (const auto& s : ensemble) {
    if (s.xxt.size() == 0) throw std::invalid_argument("tensor_mse: summaries were built without <x x^T>");
    const double n = static_cast<double>(s.truth.rows());
    double l = (s.truth * s.truth.transpose() - s.xxt).squaredNorm() / (n * n);
    double r = cross - s.q_norm2;
    lhs.push_back(l);
    rhs.push_back(r);
    gap.push_back(l - r);
  }
  return {mean_se(lhs), mean_se(rhs), mean_se(gap)};
}

// ---------------------------------------------------------------- free energy

namespace {

FreeEnergy exact_free_energy(const QuenchedInstance& inst, std::size_t cap) {
  EnumeratedPosterior post = enumerate_posterior(inst, 1.0, cap);
  return {-post.log_partition() / inst.n(), 0.0, "exact-enumeration", false};
}

FreeEnergy quadrature_free_energy(const QuenchedInstance& inst, const FreeEnergyOptions& opt) {
  const PriorSpec& prior = inst.model->prior;
  if (prior.is_discrete()) return exact_free_energy(inst, opt.cap);
  if (opt.quadrature_points < 1) throw std::invalid_argument("free_energy: quadrature_points must be >= 1");
  const int K = prior.K();
  const int q = opt.quadrature_points;
  const double S = prior.S();
  std::size_t cells = 1;
  for (int k = 0; k < K; ++k) cells *= static_cast<std::size_t>(q);
  std::vector<Vector> atoms;
  std::vector<double> probs(cells, 1.0 / static_cast<double>(cells));
  for (std::size_t c = 0; c < cells; ++c) {
    Vector v(K);
    std::size_t code = c;
    for (int k = 0; k < K; ++k) {
      v(k) = -S + (2.0 * static_cast<double>(code % q) + 1.0) * S / q;
      code /= static_cast<std::size_t>(q);
    }
    atoms.push_back(v);
  }
  ModelSpec grid = *inst.model;
  grid.prior = PriorSpec::discrete(atoms, probs, S);
  QuenchedInstance copy = inst;
  copy.model = make_model(grid);
  FreeEnergy f = exact_free_energy(copy, opt.cap);
  f.method = "quadrature";
  f.approximate = true;
  return f;
}

FreeEnergy ti_free_energy(const QuenchedInstance& inst, const FreeEnergyOptions& opt) {
  const int N = opt.ti_nodes;
  if (N < 3 || N % 2 == 0) throw std::invalid_argument("free_energy: ti_nodes must be odd and >= 3");
  const double h = 1.0 / (N - 1);
  GibbsChain chain(inst, opt.seed, 0.0);
  chain.configure(opt.ti_chain);
  double integral = 0.0;
  double var = 0.0;
  for (int j = 0; j < N; ++j) {
    double beta = j * h;
    chain.set_beta(beta);
    for (int s = 0; s < opt.ti_chain.burn_in; ++s) chain.sweep(true);
    std::vector<double> energy;
    for (int s = 1; s <= opt.ti_chain.kept_sweeps; ++s) {
      chain.sweep(false);
      if (s % opt.ti_chain.thinning != 0) continue;
      double ll = log_likelihood(chain.state(), inst);
      if (ll == kNegInf) throw std::invalid_argument("thermodynamic integration needs a likelihood with full support");
      energy.push_back(ll - side_hamiltonian(chain.state(), inst));
    }
    Estimate e = mean_se(energy);
    double se = batch_means_se(energy);
    double w = (j == 0 || j == N - 1) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    w *= h / 3.0;
    integral += w * e.value;
    var += w * w * se * se;
  }
  return {-integral / inst.n(), std::sqrt(var) / inst.n(), "mc-estimate", true};
}

}  // namespace

FreeEnergy free_energy(const QuenchedInstance& inst, FreeEnergyMethod method, const FreeEnergyOptions& options) {
  switch (method) {
    case FreeEnergyMethod::Exact:
      return exact_free_energy(inst, options.cap);
    case FreeEnergyMethod::Quadrature:
      return quadrature_free_energy(inst, options);
    case FreeEnergyMethod::ThermodynamicIntegration:
      return ti_free_energy(inst, options);
  }
  throw std::logic_error("free_energy: unknown method");
}

FreeEnergyVariance free_energy_variance(std::shared_ptr<const ModelSpec> model, int n,
                                        const std::optional<SnrMatrix>& snr, int replicates, std::uint64_t seed,
                                        FreeEnergyMethod method, const FreeEnergyOptions& options, int workers) {
  if (replicates < 30) throw std::invalid_argument("free_energy_variance: need at least 30 replicates");
  FreeEnergyVariance out;
  out.values = parallel_map(static_cast<std::size_t>(replicates), workers, [&](std::size_t r) {
    Rng rng(derive_seed(seed, {r, 0}));
    QuenchedInstance inst = draw_instance(model, n, snr, rng);
    FreeEnergyOptions opt = options;
    opt.seed = derive_seed(seed, {r, 1});
    return free_energy(inst, method, opt).value;
  });
  out.variance = sample_variance(out.values);
  out.mean = mean_se(out.values);
  return out;
}

Estimate lambda_average(const std::function<double(const SnrMatrix&)>& f, int K, double s_n, int draws, Rng& rng) {
  if (draws < 1) throw std::invalid_argument("lambda_average: need at least one draw");
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(draws));
  for (int d = 0; d < draws; ++d) v.push_back(f(sample_snr(K, s_n, rng)));
  return mean_se(v);
}

}  // namespace mmselab
