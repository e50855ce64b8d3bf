#include "mmselab/nishimori.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmselab/enumeration.hpp"
#include "mmselab/observables.hpp"
#include "mmselab/parallel.hpp"
#include "mmselab/stats.hpp"

namespace mmselab {

namespace {

std::string entry(const std::string& base, int l, int lp) {
  std::ostringstream s;
  s << base << "[" << l << "][" << lp << "]";
  return s.str();
}

std::vector<std::string> identity_names(int K) {
  std::vector<std::string> names;
  for (int l = 0; l < K; ++l)
    for (int lp = 0; lp < K; ++lp) names.push_back(entry("Q", l, lp));
  for (int l = 0; l < K; ++l)
    for (int lp = 0; lp < K; ++lp) names.push_back(entry("Q^2", l, lp));
  names.push_back("||Q||_F^2");
  return names;
}

// g values for overlap matrix q, in identity_names order.
void add_g(const Matrix& q, double w, std::vector<double>& acc) {
  const Eigen::Index K = q.rows();
  std::size_t j = 0;
  for (Eigen::Index l = 0; l < K; ++l)
    for (Eigen::Index lp = 0; lp < K; ++lp) acc[j++] += w * q(l, lp);
  for (Eigen::Index l = 0; l < K; ++l)
    for (Eigen::Index lp = 0; lp < K; ++lp) acc[j++] += w * q(l, lp) * q(l, lp);
  acc[j] += w * q.squaredNorm();
}

// <g(x,X)> - <g(x,x')> for one instance under its (possibly tempered) posterior.
std::vector<double> instance_gap(const QuenchedInstance& inst, const EnumeratedPosterior& post) {
  const std::size_t G = static_cast<std::size_t>(2 * inst.K() * inst.K() + 1);
  std::vector<double> planted(G, 0.0), replica(G, 0.0);
  std::vector<SignalMatrix> cfg;
  std::vector<double> w;
  for (std::size_t s = 0; s < post.size(); ++s) {
    if (post.probabilities()[s] == 0.0) continue;
    cfg.push_back(post.configuration(s));
    w.push_back(post.probabilities()[s]);
  }
  for (std::size_t a = 0; a < cfg.size(); ++a) {
    add_g(overlap(inst.signal, cfg[a]), w[a], planted);
    for (std::size_t b = 0; b < cfg.size(); ++b) add_g(overlap_replica(cfg[a], cfg[b]), w[a] * w[b], replica);
  }
  for (std::size_t j = 0; j < G; ++j) planted[j] -= replica[j];
  return planted;
}

SignalMatrix decode(std::size_t code, int rows, int cols) {
  SignalMatrix x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) {
      x(i, k) = (code & 1) ? 1.0 : -1.0;
      code >>= 1;
    }
  return x;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    case Verdict::Inconclusive:
      return "inconclusive";
  }
  return "unknown";
}

Verdict mc_verdict(double mean, double se, long draws, double resolution, bool control) {
  if (draws < 30 || se > resolution) return Verdict::Inconclusive;
  if (control) return std::abs(mean) > 5.0 * se ? Verdict::Pass : Verdict::Fail;
  return std::abs(mean) <= 3.0 * se ? Verdict::Pass : Verdict::Fail;
}

std::vector<IdentityResult> exact_nishimori_committee(const CommitteeToy& toy) {
  if (toy.n < 1 || toy.K < 1) throw std::invalid_argument("committee toy: n and K must be positive");
  const int m = glm_rows(toy.alpha, toy.n);
  if (toy.n * toy.K + m * toy.n + m > 40) throw std::length_error("committee toy too large for exhaustive quenched enumeration");

  ModelSpec spec;
  spec.prior = PriorSpec::rademacher(toy.K);
  spec.weights = WeightDist::Rademacher;
  spec.base = GlmModel{toy.alpha, KernelSpec{"committee", toy.flip, 1.0, {}}, nullptr};
  auto model = make_model(spec);
  const OutputKernel& kernel = *std::get<GlmModel>(model->base).impl;

  const std::size_t nX = std::size_t{1} << (toy.n * toy.K);
  const std::size_t nT = std::size_t{1} << (m * toy.n);
  const std::size_t nY = std::size_t{1} << m;
  const double pX = 1.0 / static_cast<double>(nX);
  const double pT = 1.0 / static_cast<double>(nT);
  const std::size_t G = static_cast<std::size_t>(2 * toy.K * toy.K + 1);
  std::vector<double> gap(G, 0.0);

  for (std::size_t cx = 0; cx < nX; ++cx) {
    SignalMatrix X = decode(cx, toy.n, toy.K);
    for (std::size_t ct = 0; ct < nT; ++ct) {
      Matrix theta = decode(ct, m, toy.n);
      Matrix acts = activations(theta, X);
      for (std::size_t cy = 0; cy < nY; ++cy) {
        Matrix y = decode(cy, m, 1);
        double lp = 0.0;
        for (int mu = 0; mu < m; ++mu) lp += kernel.log_density(y.row(mu).transpose(), acts.row(mu).transpose());
        double w = pX * pT * std::exp(lp);
        if (w == 0.0) continue;
        QuenchedInstance inst;
        inst.model = model;
        inst.signal = X;
        inst.hyper.weights = {theta};
        inst.observation.base = y;
        inst.observation.side = SignalMatrix::Zero(toy.n, toy.K);
        inst.noise = SignalMatrix::Zero(toy.n, toy.K);
        EnumeratedPosterior post = enumerate_posterior(inst, toy.beta, kDefaultEnumerationCap, Execution::Serial);
        std::vector<double> d = instance_gap(inst, post);
        for (std::size_t j = 0; j < G; ++j) gap[j] += w * d[j];
      }
    }
  }

  std::ostringstream fam;
  fam << "committee(n=" << toy.n << ",K=" << toy.K << ",flip=" << toy.flip << ",T=" << 1.0 / toy.beta << ")";
  const bool control = toy.beta != 1.0;
  std::vector<std::string> names = identity_names(toy.K);
  std::vector<IdentityResult> out;
  for (std::size_t j = 0; j < G; ++j) {
    IdentityResult r;
    r.family = fam.str();
    r.identity = "E<g(x,X)> - E<g(x,x')>, g=" + names[j];
    r.tier = control ? "control" : "exact";
    r.deviation = gap[j];
    r.tolerance = 1e-10;
    r.draws = static_cast<long>(nX * nT * nY);
    bool within = std::abs(gap[j]) < r.tolerance;
    r.verdict = (control ? !within : within) ? Verdict::Pass : Verdict::Fail;
    out.push_back(r);
  }
  return out;
}

std::vector<IdentityResult> mc_nishimori(const McIdentityConfig& cfg, int workers) {
  if (!cfg.model) throw std::invalid_argument("mc_nishimori: no model");
  if (cfg.draws < 1) throw std::invalid_argument("mc_nishimori: need at least one draw");
  const int K = cfg.model->K();
  const bool side = cfg.snr.has_value();

  std::vector<std::string> names = identity_names(K);
  if (side)
    for (int l = 0; l < K; ++l)
      for (int lp = 0; lp < K; ++lp) names.push_back(entry("<L>-(diag<Q>/2-<Q>)", l, lp));
  for (int l = 0; l < K; ++l)
    for (int lp = l + 1; lp < K; ++lp) names.push_back(entry("antisym<Q>", l, lp));

  auto rows = parallel_map(static_cast<std::size_t>(cfg.draws), workers, [&](std::size_t d) {
    Rng rng(derive_seed(cfg.seed, {d}));
    QuenchedInstance inst = draw_instance(cfg.model, cfg.n, cfg.snr, rng);
    EnumeratedPosterior post = enumerate_posterior(inst, cfg.beta, kDefaultEnumerationCap, Execution::Serial);
    std::vector<double> v = instance_gap(inst, post);
    SignalMatrix mean = posterior_mean(post);
    Matrix q = overlap(inst.signal, mean);
    if (side) {
      LMatrixBuilder lb(inst);
      Matrix L = posterior_expectation(post, [&](const SignalMatrix& x) -> Matrix { return lb(x).dense(); });
      for (int l = 0; l < K; ++l)
        for (int lp = 0; lp < K; ++lp) v.push_back(L(l, lp) - ((l == lp ? 0.5 * q(l, l) : 0.0) - q(l, lp)));
    }
    for (int l = 0; l < K; ++l)
      for (int lp = l + 1; lp < K; ++lp) v.push_back(0.5 * (q(l, lp) - q(lp, l)));
    return v;
  });

  std::ostringstream fam;
  if (cfg.family.empty()) {
    fam << cfg.model->variant_name() << "(n=" << cfg.n << ",K=" << K << (side ? ",side" : "") << ",T=" << 1.0 / cfg.beta
        << ")";
  } else {
    fam << cfg.family;
  }
  std::vector<IdentityResult> out;
  for (std::size_t j = 0; j < names.size(); ++j) {
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& r : rows) col.push_back(r[j]);
    Estimate e = mean_se(col);
    IdentityResult r;
    r.family = fam.str();
    r.identity = j < static_cast<std::size_t>(2 * K * K + 1) ? "E<g(x,X)> - E<g(x,x')>, g=" + names[j] : names[j];
    r.tier = cfg.control ? "control" : "mc";
    r.deviation = e.value;
    r.se = e.se;
    r.tolerance = cfg.control ? 5.0 * e.se : 3.0 * e.se;
    r.draws = cfg.draws;
    r.verdict = mc_verdict(e.value, e.se, cfg.draws, cfg.resolution, cfg.control);
    out.push_back(r);
  }
  return out;
}

}  // namespace mmselab
