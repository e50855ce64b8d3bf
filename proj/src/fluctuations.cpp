#include "mmselab/fluctuations.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmselab/enumeration.hpp"
#include "mmselab/observables.hpp"
#include "mmselab/parallel.hpp"

namespace mmselab {

namespace {

// Seed-stream tags.
constexpr std::uint64_t kLambdaStream = 0;
constexpr std::uint64_t kInstanceStream = 1;
constexpr std::uint64_t kChainStream = 2;

struct InstanceStats {
  int group = 0;
  bool converged = true;
  double q_sq = 0.0;
  double l_sq = 0.0;
  std::vector<Matrix> q_blocks;
  std::vector<Matrix> l_blocks;
  std::vector<Matrix> m_blocks;  // block means of x
  Matrix q_mean;
  Matrix l_mean;
};

double dot(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

// Average of f over ordered tuples of pairwise distinct block indices; with a
// single (exact) block the one index is reused.
template <class F>
double pair_avg(std::size_t B, F&& f) {
  if (B == 1) return f(0, 0);
  double s = 0.0;
  int c = 0;
  for (std::size_t a = 0; a < B; ++a)
    for (std::size_t b = 0; b < B; ++b)
      if (a != b) {
        s += f(a, b);
        ++c;
      }
  return s / c;
}

template <class F>
double triple_avg(std::size_t B, F&& f) {
  if (B == 1) return f(0, 0, 0);
  if (B < 3) throw std::invalid_argument("asymmetry statistic needs at least 3 independent blocks");
  double s = 0.0;
  int c = 0;
  for (std::size_t a = 0; a < B; ++a)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < B; ++d)
        if (a != b && a != d && b != d) {
          s += f(a, b, d);
          ++c;
        }
  return s / c;
}

template <class F>
double quad_avg(std::size_t B, F&& f) {
  if (B == 1) return f(0, 0, 0, 0);
  if (B < 4) throw std::invalid_argument("asymmetry statistic needs at least 4 independent blocks");
  double s = 0.0;
  int c = 0;
  for (std::size_t a = 0; a < B; ++a)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < B; ++d)
        for (std::size_t e = 0; e < B; ++e)
          if (a != b && a != d && a != e && b != d && b != e && d != e) {
            s += f(a, b, d, e);
            ++c;
          }
  return s / c;
}

bool use_enumeration(const FluctuationConfig& cfg, const QuenchedInstance& inst) {
  if (cfg.backend == PosteriorBackend::Gibbs) return false;
  bool enumerable = inst.model->prior.is_discrete() || inst.model->generative;
  if (cfg.backend == PosteriorBackend::Enumeration) return true;
  if (!enumerable) return false;
  double size = std::pow(static_cast<double>(enumeration_alphabet(inst).size()), inst.n());
  return size <= static_cast<double>(cfg.enumeration_cap);
}

InstanceStats exact_stats(const QuenchedInstance& inst) {
  EnumeratedPosterior post = enumerate_posterior(inst, 1.0, kDefaultEnumerationCap, Execution::Serial);
  LMatrixBuilder lb(inst);
  const double n = inst.n();
  InstanceStats s;
  Matrix m = Matrix::Zero(inst.n(), inst.K());
  Matrix lm = Matrix::Zero(inst.K(), inst.K());
  const auto& p = post.probabilities();
  for (std::size_t k = 0; k < post.size(); ++k) {
    if (p[k] == 0.0) continue;
    SignalMatrix x = post.configuration(k);
    Matrix L = lb(x).dense();
    s.q_sq += p[k] * (inst.signal.transpose() * x / n).squaredNorm();
    s.l_sq += p[k] * L.squaredNorm();
    m += p[k] * x;
    lm += p[k] * L;
  }
  s.q_mean = inst.signal.transpose() * m / n;
  s.l_mean = lm;
  s.q_blocks = {s.q_mean};
  s.l_blocks = {lm};
  s.m_blocks = {m};
  return s;
}

InstanceStats gibbs_stats(const QuenchedInstance& inst, const FluctuationConfig& cfg, std::uint64_t seed) {
  ReplicaSet set = sample_replicas(inst, cfg.replicas, cfg.chain, seed);
  LMatrixBuilder lb(inst);
  const double n = inst.n();
  InstanceStats s;
  s.converged = set.converged;
  std::size_t total = 0;
  s.q_mean = Matrix::Zero(inst.K(), inst.K());
  s.l_mean = Matrix::Zero(inst.K(), inst.K());
  for (const auto& rep : set.replicas) {
    const std::size_t T = rep.samples.size();
    if (T < 2) throw std::invalid_argument("each replica needs at least 2 kept samples (kept_sweeps / thinning >= 2)");
    const std::size_t half = T / 2;
    for (int h = 0; h < 2; ++h) {
      std::size_t lo = h == 0 ? 0 : half;
      std::size_t hi = h == 0 ? half : T;
      Matrix qb = Matrix::Zero(inst.K(), inst.K());
      Matrix lbk = Matrix::Zero(inst.K(), inst.K());
      Matrix mb = Matrix::Zero(inst.n(), inst.K());
      for (std::size_t t = lo; t < hi; ++t) {
        const SignalMatrix& x = rep.samples[t];
        Matrix q = inst.signal.transpose() * x / n;
        Matrix L = lb(x).dense();
        s.q_sq += q.squaredNorm();
        s.l_sq += L.squaredNorm();
        qb += q;
        lbk += L;
        mb += x;
        s.q_mean += q;
        s.l_mean += L;
        ++total;
      }
      double c = static_cast<double>(hi - lo);
      s.q_blocks.push_back(qb / c);
      s.l_blocks.push_back(lbk / c);
      s.m_blocks.push_back(mb / c);
    }
  }
  s.q_sq /= static_cast<double>(total);
  s.l_sq /= static_cast<double>(total);
  s.q_mean /= static_cast<double>(total);
  s.l_mean /= static_cast<double>(total);
  return s;
}

// Jackknife over groups of a statistic that is the mean of per-group values.
Estimate group_mean(const std::vector<double>& per_group) {
  const int G = static_cast<int>(per_group.size());
  return jackknife(G, [&](int skip) {
    double s = 0.0;
    int c = 0;
    for (int g = 0; g < G; ++g)
      if (g != skip) {
        s += per_group[static_cast<std::size_t>(g)];
        ++c;
      }
    return s / c;
  });
}

std::string entry_name(const std::string& base, int l, int lp) {
  std::ostringstream s;
  s << base << "[" << l << "][" << lp << "]";
  return s.str();
}

GridPointResult run_point(const FluctuationConfig& cfg, std::size_t index, int workers) {
  GridPointResult out;
  out.n = cfg.n_grid[index];
  out.s_n = cfg.s_n.at(out.n, index);
  const int n = out.n;
  const int K = cfg.model->K();
  const int G = cfg.lambda_draws;
  const std::uint64_t un = static_cast<std::uint64_t>(n);

  std::vector<SnrMatrix> lambdas;
  for (int g = 0; g < G; ++g) {
    Rng rng(derive_seed(cfg.seed, {un, kLambdaStream, static_cast<std::uint64_t>(g)}));
    lambdas.push_back(sample_snr(K, out.s_n, rng));
  }

  std::vector<int> exact_flags(static_cast<std::size_t>(cfg.instances), 0);
  std::vector<InstanceStats> stats = parallel_map(static_cast<std::size_t>(cfg.instances), workers, [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, {un, kInstanceStream, i}));
    QuenchedInstance inst = draw_instance(cfg.model, n, lambdas[i % static_cast<std::size_t>(G)], rng);
    bool exact = use_enumeration(cfg, inst);
    InstanceStats s = exact ? exact_stats(inst) : gibbs_stats(inst, cfg, derive_seed(cfg.seed, {un, kChainStream, i}));
    s.group = static_cast<int>(i % static_cast<std::size_t>(G));
    exact_flags[i] = exact ? 1 : 0;
    return s;
  });

  out.exact = true;
  for (int f : exact_flags) out.exact = out.exact && f == 1;
  out.budget = out.exact ? cfg.instances : static_cast<long>(cfg.instances) * cfg.replicas * cfg.chain.kept_sweeps;
  for (const auto& s : stats)
    if (!s.converged) ++out.unconverged;

  std::vector<std::vector<const InstanceStats*>> groups(static_cast<std::size_t>(G));
  for (const auto& s : stats) groups[static_cast<std::size_t>(s.group)].push_back(&s);
  for (const auto& g : groups)
    if (g.size() < 2) throw std::invalid_argument("every lambda draw needs at least 2 instances (instances >= 2 * lambda_draws)");

  auto per_group_mean = [&](auto&& value) {
    std::vector<double> v;
    for (const auto& g : groups) {
      double s = 0.0;
      for (const InstanceStats* p : g) s += value(*p);
      v.push_back(s / static_cast<double>(g.size()));
    }
    return v;
  };

  auto thermal_q = per_group_mean([](const InstanceStats& s) {
    return s.q_sq - pair_avg(s.q_blocks.size(), [&](std::size_t a, std::size_t b) { return dot(s.q_blocks[a], s.q_blocks[b]); });
  });
  auto thermal_l = per_group_mean([](const InstanceStats& s) {
    return s.l_sq - pair_avg(s.l_blocks.size(), [&](std::size_t a, std::size_t b) { return dot(s.l_blocks[a], s.l_blocks[b]); });
  });
  const double dn = n;
  auto asymmetry = per_group_mean([dn](const InstanceStats& s) {
    const std::size_t B = s.m_blocks.size();
    double cross = triple_avg(B, [&](std::size_t a, std::size_t b, std::size_t c) {
      return dot(s.q_blocks[a], s.m_blocks[b].transpose() * s.m_blocks[c] / dn);
    });
    double sq = quad_avg(B, [&](std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
      return dot(s.m_blocks[a].transpose() * s.m_blocks[b] / dn, s.m_blocks[c].transpose() * s.m_blocks[d] / dn);
    });
    return s.q_sq - 2.0 * cross + sq;
  });

  // E<||Q - E<Q>||^2> within a lambda group: mean <||Q||^2> minus the
  // average cross product of distinct instances' posterior means.
  auto total_of = [&](auto&& sq, auto&& mean) {
    std::vector<double> v;
    for (const auto& g : groups) {
      double a = 0.0;
      for (const InstanceStats* p : g) a += sq(*p);
      a /= static_cast<double>(g.size());
      double c = 0.0;
      int cnt = 0;
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
          if (i != j) {
            c += dot(mean(*g[i]), mean(*g[j]));
            ++cnt;
          }
      v.push_back(a - c / cnt);
    }
    return v;
  };
  auto total_q = total_of([](const InstanceStats& s) { return s.q_sq; }, [](const InstanceStats& s) -> const Matrix& { return s.q_mean; });
  auto total_l = total_of([](const InstanceStats& s) { return s.l_sq; }, [](const InstanceStats& s) -> const Matrix& { return s.l_mean; });

  Estimate th = group_mean(thermal_q);
  Estimate tot = group_mean(total_q);
  const double scale = std::sqrt(out.s_n * n);
  out.stats.push_back({"thermal_q", th});
  out.stats.push_back({"total_q", tot});
  out.stats.push_back({"asymmetry_q", group_mean(asymmetry)});
  out.stats.push_back({"thermal_l", group_mean(thermal_l)});
  out.stats.push_back({"total_l", group_mean(total_l)});
  out.stats.push_back({"thermal_q_scaled", {th.value * scale, th.se * scale}});
  for (int l = 0; l < K; ++l)
    for (int lp = l + 1; lp < K; ++lp)
      out.stats.push_back({entry_name("antisym_q", l, lp), group_mean(per_group_mean([l, lp](const InstanceStats& s) {
                             return 0.5 * (s.q_mean(l, lp) - s.q_mean(lp, l));
                           }))});
  for (int l = 0; l < K; ++l)
    for (int lp = 0; lp < K; ++lp)
      out.stats.push_back({entry_name("l_relation", l, lp), group_mean(per_group_mean([l, lp](const InstanceStats& s) {
                             double rhs = (l == lp ? 0.5 * s.q_mean(l, l) : 0.0) - s.q_mean(l, lp);
                             return s.l_mean(l, lp) - rhs;
                           }))});
  out.decomposition_ok = th.value <= tot.value + 3.0 * std::sqrt(th.se * th.se + tot.se * tot.se);
  out.ok = true;
  return out;
}

}  // namespace

double SnSchedule::at(int n, std::size_t index) const {
  if (!values.empty()) {
    if (index >= values.size()) throw std::invalid_argument("s_n schedule has fewer values than grid points");
    return values[index];
  }
  return coefficient * std::pow(static_cast<double>(n), exponent);
}

const Estimate& GridPointResult::stat(const std::string& name) const {
  for (const auto& s : stats)
    if (s.name == name) return s.estimate;
  throw std::out_of_range("no statistic named " + name);
}

bool FluctuationReport::any_failed() const {
  for (const auto& p : points)
    if (!p.ok) return true;
  return false;
}

FluctuationReport fluctuation_decomposition(const FluctuationConfig& cfg, int workers) {
  if (!cfg.model) throw std::invalid_argument("fluctuation_decomposition: no model");
  if (cfg.lambda_draws < 1 || cfg.instances < 2 * cfg.lambda_draws)
    throw std::invalid_argument("fluctuation_decomposition: need instances >= 2 * lambda_draws >= 2");
  if (cfg.replicas < 2) throw std::invalid_argument("fluctuation_decomposition: need at least 2 replicas");
  for (std::size_t i = 1; i < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] <= cfg.n_grid[i - 1]) throw std::invalid_argument("n grid must be strictly increasing");

  FluctuationReport report;
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    try {
      report.points.push_back(run_point(cfg, i, workers));
    } catch (const std::exception& e) {
      GridPointResult failed;
      failed.n = cfg.n_grid[i];
      try {
        failed.s_n = cfg.s_n.at(failed.n, i);
      } catch (const std::exception&) {
        failed.s_n = 0.0;
      }
      failed.ok = false;
      failed.error = e.what();
      report.points.push_back(failed);
    }
  }

  struct Spec {
    const char* stat;
    bool quartic;
    double exponent;
  };
  const Spec specs[] = {{"thermal_q", false, -0.5},
                        {"total_q", true, -1.0 / 6.0},
                        {"asymmetry_q", false, -0.5},
                        {"thermal_l", false, -1.0},
                        {"total_l", true, -1.0 / 3.0}};
  for (const auto& sp : specs) {
    NamedFit nf;
    nf.statistic = sp.stat;
    nf.rate_variable = sp.quartic ? "s_n^4*n" : "s_n*n";
    nf.bound_exponent = sp.exponent;
    std::vector<ScalingPoint> pts;
    for (const auto& p : report.points) {
      if (!p.ok) continue;
      double rate = sp.quartic ? std::pow(p.s_n, 4) * p.n : p.s_n * p.n;
      const Estimate& e = p.stat(sp.stat);
      pts.push_back({rate, e.value, e.se});
    }
    try {
      nf.fit = fit_scaling(pts);
      nf.ok = !nf.fit.degenerate;
      nf.diagnostic = nf.fit.diagnostic;
    } catch (const std::exception& e) {
      nf.ok = false;
      nf.diagnostic = e.what();
    }
    report.fits.push_back(nf);
  }
  return report;
}

}  // namespace mmselab
