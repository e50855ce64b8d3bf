#include "mmselab/experiments.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>
#include <stdexcept>

#include "mmselab/enumeration.hpp"
#include "mmselab/estimators.hpp"
#include "mmselab/fluctuations.hpp"
#include "mmselab/nishimori.hpp"
#include "mmselab/observables.hpp"
#include "mmselab/parallel.hpp"

namespace mmselab {

namespace {

constexpr std::uint64_t kLambdaStream = 0;
constexpr std::uint64_t kInstanceStream = 1;
constexpr std::uint64_t kChainStream = 2;

std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

RunReport start_report(const std::string& command, const ExperimentConfig& cfg) {
  RunReport r;
  r.command = command;
  r.config_yaml = to_yaml(cfg);
  r.seed = cfg.seed.value_or(0);
  r.workers = cfg.workers;
  r.started = utc_now();
  return r;
}

std::string point_failure(int n, const std::string& what) {
  std::ostringstream s;
  s << "n=" << n << ": " << what;
  return s.str();
}

std::string entry(const std::string& base, Eigen::Index l, Eigen::Index lp) {
  std::ostringstream s;
  s << base << "[" << l << "][" << lp << "]";
  return s.str();
}

bool enumerable(const QuenchedInstance& inst, PosteriorBackend backend, std::size_t cap) {
  if (backend == PosteriorBackend::Gibbs) return false;
  if (backend == PosteriorBackend::Enumeration) return true;
  if (!inst.model->prior.is_discrete() && !inst.model->generative) return false;
  return std::pow(static_cast<double>(enumeration_alphabet(inst).size()), inst.n()) <= static_cast<double>(cap);
}

}  // namespace

FluctuationConfig fluctuation_config(const ExperimentConfig& c) {
  FluctuationConfig f;
  f.model = make_model(c.model);
  f.n_grid = c.n_grid;
  f.s_n = c.s_n;
  f.lambda_draws = c.lambda_draws;
  f.instances = c.instances;
  f.replicas = c.replicas;
  f.chain = c.chain;
  f.seed = c.seed.value_or(0);
  f.backend = c.backend;
  f.enumeration_cap = c.enumeration_cap;
  return f;
}

RunReport run_concentration(const ExperimentConfig& cfg) {
  Stopwatch clock;
  RunReport report = start_report("concentration", cfg);
  FluctuationReport fr = fluctuation_decomposition(fluctuation_config(cfg), cfg.workers);
  for (const auto& p : fr.points) {
    if (!p.ok) {
      report.failures.push_back(point_failure(p.n, p.error));
      continue;
    }
    for (const auto& s : p.stats)
      report.records.push_back({p.n, p.s_n, s.name, s.estimate.value, s.estimate.se, p.exact, p.budget});
    report.records.push_back({p.n, p.s_n, "unconverged_instances", static_cast<double>(p.unconverged), 0.0, true, p.budget});
    report.records.push_back({p.n, p.s_n, "decomposition_check", p.decomposition_ok ? 1.0 : 0.0, 0.0, true, p.budget});
  }
  for (const auto& f : fr.fits) report.fits.push_back({f.statistic, f.rate_variable, f.bound_exponent, f.ok, f.diagnostic, f.fit});
  report.wall_seconds = clock.seconds();
  return report;
}

RunReport run_identity_suite(const ExperimentConfig& cfg) {
  Stopwatch clock;
  RunReport report = start_report("identities", cfg);
  const std::uint64_t seed = cfg.seed.value_or(0);
  auto add_records = [&](const std::vector<IdentityResult>& rows, int n, double s) {
    for (const auto& r : rows) {
      report.identities.push_back(r);
      report.records.push_back({n, s, r.family + ": " + r.identity, r.deviation, r.se, r.tier == "exact", r.draws});
    }
  };
  for (const auto& toy : cfg.identities.exact) {
    try {
      add_records(exact_nishimori_committee(toy), toy.n, 0.0);
    } catch (const std::exception& e) {
      IdentityResult r;
      r.family = "committee(n=" + std::to_string(toy.n) + ",K=" + std::to_string(toy.K) + ")";
      r.identity = std::string("not run: ") + e.what();
      r.tier = "exact";
      r.verdict = Verdict::Fail;
      report.identities.push_back(r);
    }
  }
  for (std::size_t i = 0; i < cfg.identities.mc.size(); ++i) {
    const McIdentityEntry& m = cfg.identities.mc[i];
    try {
      McIdentityConfig mc;
      mc.model = make_model(m.model);
      mc.n = m.n;
      if (m.snr_scale > 0.0) {
        Rng rng(derive_seed(seed, {i, kLambdaStream}));
        mc.snr = sample_snr(mc.model->K(), m.snr_scale, rng);
      }
      mc.draws = m.draws;
      mc.beta = 1.0 / m.temperature;
      mc.seed = derive_seed(seed, {i, kInstanceStream});
      mc.resolution = m.resolution;
      mc.control = m.control;
      mc.family = m.name;
      std::vector<IdentityResult> rows = mc_nishimori(mc, cfg.workers);
      if (m.control) {
        // the control succeeds when at least one identity is broken
        IdentityResult summary;
        summary.family = m.name;
        summary.identity = "some identity deviates beyond 5 SE";
        summary.tier = "control";
        summary.draws = m.draws;
        summary.verdict = Verdict::Fail;
        bool inconclusive = false;
        for (const auto& r : rows) {
          if (r.verdict == Verdict::Pass && std::abs(r.deviation) / r.se > std::abs(summary.deviation) / std::max(summary.se, 1e-300)) {
            summary.deviation = r.deviation;
            summary.se = r.se;
            summary.tolerance = r.tolerance;
          }
          if (r.verdict == Verdict::Pass) summary.verdict = Verdict::Pass;
          if (r.verdict == Verdict::Inconclusive) inconclusive = true;
        }
        if (summary.verdict != Verdict::Pass && inconclusive) summary.verdict = Verdict::Inconclusive;
        rows.push_back(summary);
      }
      add_records(rows, m.n, m.snr_scale);
    } catch (const std::exception& e) {
      IdentityResult r;
      r.family = m.name;
      r.identity = std::string("not run: ") + e.what();
      r.tier = m.control ? "control" : "mc";
      r.verdict = Verdict::Inconclusive;
      report.identities.push_back(r);
      report.failures.push_back(m.name + ": " + e.what());
    }
  }
  report.wall_seconds = clock.seconds();
  return report;
}

RunReport run_free_energy(const ExperimentConfig& cfg) {
  Stopwatch clock;
  RunReport report = start_report("free-energy", cfg);
  auto model = make_model(cfg.model);
  const std::uint64_t seed = cfg.seed.value_or(0);
  const int R = cfg.free_energy.replicates;
  FreeEnergyMethod method = cfg.free_energy.method == "exact"        ? FreeEnergyMethod::Exact
                            : cfg.free_energy.method == "quadrature" ? FreeEnergyMethod::Quadrature
                                                                     : FreeEnergyMethod::ThermodynamicIntegration;
  for (std::size_t gi = 0; gi < cfg.n_grid.size(); ++gi) {
    const int n = cfg.n_grid[gi];
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    try {
      const double s = cfg.s_n.at(n, gi);
      Rng lrng(derive_seed(seed, {un, kLambdaStream}));
      SnrMatrix snr = sample_snr(model->K(), s, lrng);
      struct Pair {
        double f = 0.0, f_se = 0.0, f0 = 0.0;
      };
      std::vector<Pair> vals = parallel_map(static_cast<std::size_t>(R), cfg.workers, [&](std::size_t r) {
        Rng rng(derive_seed(seed, {un, kInstanceStream, r}));
        QuenchedInstance inst = draw_instance(model, n, snr, rng);
        FreeEnergyOptions opt = cfg.free_energy.options;
        opt.seed = derive_seed(seed, {un, kChainStream, r, 0});
        FreeEnergy f = free_energy(inst, method, opt);
        Pair p{f.value, f.se, 0.0};
        if (cfg.free_energy.base) {
          opt.seed = derive_seed(seed, {un, kChainStream, r, 1});
          p.f0 = free_energy(inst.with_snr(std::nullopt), method, opt).value;
        }
        return p;
      });
      std::vector<double> f, f0, gap;
      for (const auto& p : vals) {
        f.push_back(p.f);
        f0.push_back(p.f0);
        gap.push_back(p.f0 - p.f);
      }
      const bool exact = false;
      Estimate ef = mean_se(f);
      Estimate var = sample_variance(f);
      report.records.push_back({n, s, "free_energy", ef.value, ef.se, exact, R});
      report.records.push_back({n, s, "free_energy_variance", var.value, var.se, exact, R});
      report.records.push_back({n, s, "n_times_variance", n * var.value, n * var.se, exact, R});
      if (cfg.free_energy.base) {
        Estimate e0 = mean_se(f0);
        Estimate eg = mean_se(gap);
        report.records.push_back({n, s, "free_energy_base", e0.value, e0.se, exact, R});
        report.records.push_back({n, s, "free_energy_gap", eg.value, eg.se, exact, R});
        report.records.push_back({n, s, "gap_over_s_n", eg.value / s, eg.se / s, exact, R});
      }
    } catch (const std::exception& e) {
      report.failures.push_back(point_failure(n, e.what()));
    }
  }
  report.wall_seconds = clock.seconds();
  return report;
}

RunReport run_mmse_sweep(const ExperimentConfig& cfg) {
  Stopwatch clock;
  RunReport report = start_report("mmse-sweep", cfg);
  auto model = make_model(cfg.model);
  const std::uint64_t seed = cfg.seed.value_or(0);
  const int K = model->K();
  for (std::size_t gi = 0; gi < cfg.n_grid.size(); ++gi) {
    const int n = cfg.n_grid[gi];
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    try {
      const double s = cfg.s_n.at(n, gi);
      std::vector<int> exact_flags(static_cast<std::size_t>(cfg.instances), 0);
      std::vector<PosteriorSummary> ens =
          parallel_map(static_cast<std::size_t>(cfg.instances), cfg.workers, [&](std::size_t i) {
            Rng rng(derive_seed(seed, {un, kInstanceStream, i}));
            std::optional<SnrMatrix> snr;
            if (cfg.mmse.side_channel) snr = sample_snr(K, s, rng);
            QuenchedInstance inst = draw_instance(model, n, snr, rng);
            if (enumerable(inst, cfg.backend, cfg.enumeration_cap)) {
              exact_flags[i] = 1;
              return summarize(inst, enumerate_posterior(inst, 1.0, kDefaultEnumerationCap, Execution::Serial), cfg.mmse.tensor);
            }
            ReplicaSet set = sample_replicas(inst, cfg.replicas, cfg.chain, derive_seed(seed, {un, kChainStream, i}));
            std::vector<SignalMatrix> pooled;
            for (auto& rep : set.replicas)
              for (auto& x : rep.samples) pooled.push_back(std::move(x));
            return summarize(inst, pooled, cfg.mmse.tensor);
          });
      bool exact = true;
      for (int f : exact_flags) exact = exact && f == 1;
      const long budget = exact ? cfg.instances : static_cast<long>(cfg.instances) * cfg.replicas * cfg.chain.kept_sweeps;
      Matrix m2 = signal_second_moment(*model);
      MmseEstimate mm = matrix_mmse(ens, m2);
      for (Eigen::Index l = 0; l < K; ++l)
        for (Eigen::Index lp = 0; lp < K; ++lp) {
          report.records.push_back({n, s, entry("mmse_direct", l, lp), mm.direct.value(l, lp), mm.direct.se(l, lp), exact, budget});
          report.records.push_back(
              {n, s, entry("mmse_overlap", l, lp), mm.overlap_form.value(l, lp), mm.overlap_form.se(l, lp), exact, budget});
        }
      ScalarMmseEstimate sm = scalar_mmse(ens, m2);
      report.records.push_back({n, s, "scalar_mmse_direct", sm.direct.value, sm.direct.se, exact, budget});
      report.records.push_back({n, s, "scalar_mmse_overlap", sm.overlap_form.value, sm.overlap_form.se, exact, budget});
      if (cfg.mmse.tensor) {
        TensorMseEstimate t = tensor_mse(ens, m2);
        report.records.push_back({n, s, "tensor_mse_lhs", t.lhs.value, t.lhs.se, exact, budget});
        report.records.push_back({n, s, "tensor_mse_rhs", t.rhs.value, t.rhs.se, exact, budget});
        report.records.push_back({n, s, "tensor_mse_gap", t.gap.value, t.gap.se, exact, budget});
      }
    } catch (const std::exception& e) {
      report.failures.push_back(point_failure(n, e.what()));
    }
  }
  report.wall_seconds = clock.seconds();
  return report;
}

SamplerCheckResult sampler_check(const SamplerCheckConfig& cfg, int workers) {
  if (!cfg.model) throw std::invalid_argument("sampler_check: no model");
  const int n = cfg.n;
  const int K = cfg.model->K();
  struct Row {
    std::vector<double> z;
    int mismatched = 0;
  };
  auto rows = parallel_map(static_cast<std::size_t>(cfg.instances), workers, [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, {i, kInstanceStream}));
    std::optional<SnrMatrix> snr;
    if (cfg.snr_scale > 0.0) snr = sample_snr(K, cfg.snr_scale, rng);
    QuenchedInstance inst = draw_instance(cfg.model, n, snr, rng);
    EnumeratedPosterior post = enumerate_posterior(inst, 1.0, kDefaultEnumerationCap, Execution::Serial);

    auto quantities = [&](const SignalMatrix& x) {
      std::vector<double> q(x.data(), x.data() + x.size());
      Matrix ov = overlap(inst.signal, x);
      for (Eigen::Index l = 0; l < K; ++l)
        for (Eigen::Index lp = 0; lp < K; ++lp) q.push_back(ov(l, lp));
      return q;
    };
    const std::size_t Qn = static_cast<std::size_t>(n * K + K * K);
    std::vector<double> exact(Qn, 0.0);
    for (std::size_t s = 0; s < post.size(); ++s) {
      double p = post.probabilities()[s];
      if (p == 0.0) continue;
      auto q = quantities(post.configuration(s));
      for (std::size_t j = 0; j < Qn; ++j) exact[j] += p * q[j];
    }

    std::vector<double> est(Qn, 0.0), var(Qn, 0.0);
    for (int r = 0; r < cfg.replicas; ++r) {
      GibbsChain chain(inst, derive_seed(cfg.seed, {i, kChainStream, static_cast<std::uint64_t>(r)}));
      chain.configure(cfg.chain);
      for (int s = 0; s < cfg.chain.burn_in; ++s) chain.sweep(true);
      std::vector<std::vector<double>> series(Qn);
      for (int s = 1; s <= cfg.chain.kept_sweeps; ++s) {
        chain.sweep(false);
        if (s % cfg.chain.thinning != 0) continue;
        auto q = quantities(chain.state());
        for (std::size_t j = 0; j < Qn; ++j) series[j].push_back(q[j]);
      }
      for (std::size_t j = 0; j < Qn; ++j) {
        double m = 0.0;
        for (double v : series[j]) m += v;
        est[j] += m / static_cast<double>(series[j].size()) / cfg.replicas;
        double se = batch_means_se(series[j], 40);
        var[j] += se * se / (static_cast<double>(cfg.replicas) * cfg.replicas);
      }
    }
    // A series that never moved has batch-means SE 0. Such a chain can only
    // resolve deviations down to (range of the quantity) / (number of samples),
    // so that resolution acts as a floor on the SE.
    const double S = inst.model->prior.S();
    const double samples = static_cast<double>(cfg.replicas) * (cfg.chain.kept_sweeps / cfg.chain.thinning);
    Row row;
    for (std::size_t j = 0; j < Qn; ++j) {
      double diff = est[j] - exact[j];
      double range = j < static_cast<std::size_t>(n * K) ? 2.0 * S : 2.0 * S * S;
      double floor = range / samples;
      if (var[j] > 0.0) {
        row.z.push_back(diff / std::max(std::sqrt(var[j]), floor));
      } else if (std::abs(diff) > 5.0 * floor) {
        ++row.mismatched;
      }
    }
    return row;
  });

  SamplerCheckResult res;
  res.family = cfg.model->variant_name();
  double spread = 0.0;
  for (const auto& row : rows) {
    res.mismatched_exact += row.mismatched;
    bool flagged = row.mismatched > 0;
    double c = 0.0;
    for (double z : row.z) {
      ++res.comparisons;
      res.chi2 += z * z;
      c += z * z;
      res.max_abs_z = std::max(res.max_abs_z, std::abs(z));
      if (std::abs(z) > 3.0) {
        ++res.beyond_3se;
        flagged = true;
      }
    }
    res.flagged_instances += flagged;
    spread += (c - static_cast<double>(row.z.size())) * (c - static_cast<double>(row.z.size()));
  }
  const double d = res.comparisons;
  // z values of one instance are correlated, which widens the law of sum z^2
  // beyond the independent 2d; the per-instance sums are independent, so
  // their spread estimates the variance. Only an excess indicates bias.
  res.chi2_sd = std::max(std::sqrt(2.0 * d), std::sqrt(spread));
  res.chi2_ok = d > 0 && res.chi2 - d <= 3.0 * res.chi2_sd;
  // Within an instance the <Q> entries are linear in the marginals, so
  // exceedances cluster; instances are independent. By the union bound an
  // instance is flagged with probability at most (its comparisons) * P(|z|>3),
  // and the flagged count is compared with the Poisson quantile at the
  // one-sided 3-sigma level.
  const double p3 = std::erfc(3.0 / std::sqrt(2.0));
  const double mu = d * p3;
  const double level = 0.5 * std::erfc(3.0 / std::sqrt(2.0));
  double term = std::exp(-mu), cdf = term;
  int limit = 0;
  while (1.0 - cdf > level) {
    ++limit;
    term *= mu / limit;
    cdf += term;
  }
  res.flagged_limit = limit;
  res.count_ok = res.flagged_instances <= limit;
  return res;
  return res;
}

}  // namespace mmselab
