// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status is 0 only when every criterion passes.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mmselab/config.hpp"
#include "mmselab/estimators.hpp"
#include "mmselab/experiments.hpp"
#include "mmselab/nishimori.hpp"
#include "mmselab/report.hpp"

using namespace mmselab;

namespace {

struct Outcome {
  bool pass = false;
  std::vector<std::string> details;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::shared_ptr<const ModelSpec> model_of(PriorSpec prior, BaseModel base, WeightDist w = WeightDist::Gaussian) {
  ModelSpec s;
  s.prior = std::move(prior);
  s.base = std::move(base);
  s.weights = w;
  return make_model(std::move(s));
}

int workers_available() {
#ifdef _OPENMP
  return std::max(1, omp_get_max_threads());
#else
  return 1;
#endif
}

// Non-increasing within SE: every step up is smaller than the combined SE.
bool decreasing_within_se(const std::vector<Estimate>& v, std::vector<std::string>& details, const char* what) {
  bool ok = true;
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    double step = v[k + 1].value - v[k].value;
    double se = std::hypot(v[k].se, v[k + 1].se);
    bool good = step < se;
    ok = ok && good;
    details.push_back(fmt("%s step %zu: %.4g -> %.4g (change %+.3g, combined se %.3g)%s", what, k, v[k].value,
                          v[k + 1].value, step, se, good ? "" : "  <- increase"));
  }
  return ok;
}

// ---------------------------------------------------------------- criteria

Outcome exact_suite() {
  Outcome o{true, {}};
  for (CommitteeToy toy : {CommitteeToy{3, 1, 1.0, 0.0, 1.0}, CommitteeToy{2, 2, 1.0, 0.0, 1.0}}) {
    double worst = 0.0;
    auto rows = exact_nishimori_committee(toy);
    for (const auto& r : rows) {
      worst = std::max(worst, std::abs(r.deviation));
      o.pass = o.pass && r.verdict == Verdict::Pass && std::abs(r.deviation) < 1e-10;
    }
    o.details.push_back(fmt("committee n=%d K=%d: %zu identities, max |deviation| %.3g", toy.n, toy.K, rows.size(), worst));
  }
  return o;
}

Outcome negative_control() {
  // The deterministic committee likelihood is 0 or -inf, which tempering leaves
  // unchanged, so the control uses the noisy committee (label flips 0.1).
  Outcome o;
  ModelSpec s;
  s.prior = PriorSpec::rademacher(1);
  s.base = GlmModel{1.0, KernelSpec{"committee", 0.1, 1.0, {}}, nullptr};
  s.weights = WeightDist::Rademacher;
  McIdentityConfig cfg;
  cfg.model = make_model(s);
  cfg.n = 3;
  cfg.draws = 20000;
  cfg.beta = 1.0 / 1.1;
  cfg.seed = 1101;
  cfg.control = true;
  double best = 0.0;
  for (const auto& r : mc_nishimori(cfg, workers_available())) {
    double z = r.se > 0 ? std::abs(r.deviation) / r.se : 0.0;
    best = std::max(best, z);
    o.details.push_back(fmt("%s: deviation %.4g, se %.3g (%.1f se)", r.identity.c_str(), r.deviation, r.se, z));
  }
  o.pass = best > 5.0;
  auto exact = exact_nishimori_committee({3, 1, 1.0, 0.1, 1.0 / 1.1});
  double worst = 0.0;
  for (const auto& r : exact) worst = std::max(worst, std::abs(r.deviation));
  o.details.push_back(fmt("exact enumeration of the same tempered toy: max |deviation| %.3g", worst));
  auto det = exact_nishimori_committee({3, 1, 1.0, 0.0, 1.0 / 1.1});
  worst = 0.0;
  for (const auto& r : det) worst = std::max(worst, std::abs(r.deviation));
  o.details.push_back(fmt("deterministic committee at T=1.1 (tempering-invariant): max |deviation| %.3g", worst));
  return o;
}

Outcome l_relation() {
  Outcome o{true, {}};
  McIdentityConfig cfg;
  cfg.model = model_of(PriorSpec::rademacher(2), SpikedTensorModel{2});
  cfg.n = 3;
  Rng rng(404);
  cfg.snr = sample_snr(2, 1.0, rng);
  cfg.draws = 10000;
  cfg.seed = 4040;
  for (const auto& r : mc_nishimori(cfg, workers_available())) {
    if (r.identity.rfind("<L>", 0) != 0) continue;
    bool good = std::abs(r.deviation) <= 3.0 * r.se;
    o.pass = o.pass && good;
    o.details.push_back(fmt("%s: %.4g +/- %.3g%s", r.identity.c_str(), r.deviation, r.se, good ? "" : "  <- beyond 3 se"));
  }
  return o;
}

Outcome gradient_oracle() {
  Outcome o{true, {}};
  for (int K = 1; K <= 3; ++K) {
    auto model = model_of(PriorSpec::rademacher(K), SpikedTensorModel{2});
    const int n = K == 3 ? 3 : 4;
    double worst = 0.0;
    int checked = 0;
    for (int t = 0; t < 5; ++t) {
      Rng rng(derive_seed(505, {std::uint64_t(K), std::uint64_t(t)}));
      SnrMatrix lam = sample_snr(K, 0.5, rng);
      QuenchedInstance inst = draw_instance(model, n, lam, rng);
      PosteriorSummary s = summarize(inst, enumerate_posterior(inst));
      const double h = 1e-5;
      for (int l = 0; l < K; ++l)
        for (int lp = l; lp < K; ++lp) {
          Matrix E = elementary_direction(K, l, lp).dense();
          auto f_at = [&](double step) {
            SnrMatrix moved = SnrMatrix::general(SymMatrix::from_dense(lam.value().dense() + step * E));
            return free_energy(inst.with_snr(moved), FreeEnergyMethod::Exact).value;
          };
          double fd = (f_at(h) - f_at(-h)) / (2.0 * h);
          double rel = std::abs((*s.l_mean)(l, lp) - fd) / std::abs(fd);
          worst = std::max(worst, rel);
          ++checked;
        }
    }
    o.pass = o.pass && worst < 1e-5;
    o.details.push_back(fmt("K=%d: %d directions over 5 instances, max relative error %.3g", K, checked, worst));
  }
  return o;
}

Outcome frechet_oracle() {
  Outcome o{true, {}};
  Rng rng(606);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    int K = 1 + t % 3;
    SnrMatrix m = sample_snr(K, 1.0, rng);
    for (int l = 0; l < K; ++l)
      for (int lp = l; lp < K; ++lp) {
        Matrix E = elementary_direction(K, l, lp).dense();
        const double h = 1e-6;
        Matrix fd = (sqrt_spd(SymMatrix::from_dense(m.base().dense() + h * E)).dense() -
                     sqrt_spd(SymMatrix::from_dense(m.base().dense() - h * E)).dense()) /
                    (2.0 * h);
        Matrix d = sqrt_frechet_derivative(m.base(), l, lp).dense();
        worst = std::max(worst, (d - fd).norm() / fd.norm());
      }
  }
  o.pass = worst < 1e-6;
  o.details.push_back(fmt("100 matrices, K in {1,2,3}, every direction: max relative error %.3g", worst));
  return o;
}

Outcome base_gap() {
  // Biased binary prior: with a symmetric prior the spiked Wigner posterior
  // mean vanishes without side information and the gap is only O(s_n^2).
  Outcome o;
  auto model = model_of(PriorSpec::binary(1, 0.75), SpikedTensorModel{2});
  const std::vector<double> scales{0.1, 0.05, 0.025};
  const int R = 2000;
  struct Row {
    std::vector<double> gap;
  };
  auto rows = parallel_map(static_cast<std::size_t>(R), workers_available(), [&](std::size_t r) {
    Rng rng(derive_seed(707, {r}));
    SnrMatrix unit = sample_snr(1, 1.0, rng);
    QuenchedInstance inst = draw_instance(model, 8, std::nullopt, rng);
    double f0 = free_energy(inst, FreeEnergyMethod::Exact).value;
    Row row;
    for (double s : scales) {
      QuenchedInstance pert = inst.with_snr(SnrMatrix(s, unit.base()));
      row.gap.push_back(free_energy(pert, FreeEnergyMethod::Exact).value - f0);
    }
    return row;
  });
  std::vector<Estimate> gaps;
  std::vector<double> ratio;
  for (std::size_t k = 0; k < scales.size(); ++k) {
    std::vector<double> col;
    for (const auto& row : rows) col.push_back(row.gap[k]);
    gaps.push_back(mean_se(col));
    ratio.push_back(std::abs(gaps.back().value) / scales[k]);
    o.details.push_back(fmt("s_n=%.3f: E F_n - E F_0n = %.5g +/- %.2g, gap/s_n = %.4g", scales[k], gaps.back().value,
                            gaps.back().se, ratio.back()));
  }
  bool decreasing = std::abs(gaps[1].value) < std::abs(gaps[0].value) && std::abs(gaps[2].value) < std::abs(gaps[1].value);
  double spread = *std::max_element(ratio.begin(), ratio.end()) / *std::min_element(ratio.begin(), ratio.end());
  o.details.push_back(fmt("gap decreasing: %s, max/min of gap/s_n: %.3f (limit 2)", decreasing ? "yes" : "no", spread));
  o.pass = decreasing && spread <= 2.0;
  return o;
}

Outcome free_energy_variance_check() {
  Outcome o;
  auto model = model_of(PriorSpec::rademacher(1), SpikedTensorModel{2});
  std::vector<double> scaled;
  for (int n : {25, 50, 100}) {
    Rng rng(derive_seed(808, {std::uint64_t(n)}));
    double s = std::pow(n, -0.125);
    SnrMatrix snr = sample_snr(1, s, rng);
    FreeEnergyOptions opts;
    opts.seed = derive_seed(809, {std::uint64_t(n)});
    FreeEnergyVariance v = free_energy_variance(model, n, snr, 200, derive_seed(810, {std::uint64_t(n)}),
                                                FreeEnergyMethod::ThermodynamicIntegration, opts, workers_available());
    scaled.push_back(n * v.variance.value);
    o.details.push_back(fmt("n=%d: Var(F_n) = %.4g +/- %.2g, n Var(F_n) = %.4g +/- %.2g (E F_n = %.4f)", n,
                            v.variance.value, v.variance.se, n * v.variance.value, n * v.variance.se, v.mean.value));
  }
  double spread = *std::max_element(scaled.begin(), scaled.end()) / *std::min_element(scaled.begin(), scaled.end());
  o.details.push_back(fmt("max/min of n Var(F_n): %.3f (limit 3)", spread));
  o.pass = spread <= 3.0;
  return o;
}

struct ConcentrationRuns {
  ExperimentConfig config;
  RunReport one;
  std::map<std::string, std::map<int, Estimate>> stats;  // statistic -> n -> estimate
  std::vector<double> s_n;
  double seconds = 0.0;
};

ConcentrationRuns& concentration_runs() {
  static ConcentrationRuns runs = [] {
    ConcentrationRuns r;
    r.config.seed = 909;
    r.config.workers = 1;
    auto t0 = std::chrono::steady_clock::now();
    r.one = run_concentration(r.config);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& rec : r.one.records) r.stats[rec.statistic][rec.n] = {rec.value, rec.se};
    for (std::size_t i = 0; i < r.config.n_grid.size(); ++i) r.s_n.push_back(r.config.s_n.at(r.config.n_grid[i], i));
    return r;
  }();
  return runs;
}

std::vector<Estimate> column(const ConcentrationRuns& r, const std::string& name) {
  std::vector<Estimate> v;
  for (int n : r.config.n_grid) v.push_back(r.stats.at(name).at(n));
  return v;
}

Outcome symmetry() {
  ConcentrationRuns& r = concentration_runs();
  Outcome o;
  Estimate a = r.stats.at("antisym_q[0][1]").at(50);
  o.pass = r.one.failures.empty() && std::abs(a.value) <= 3.0 * a.se;
  o.details.push_back(fmt("spiked Wigner K=2, n=50 (Gibbs, default budgets): antisymmetric part of E<Q> = %.4g +/- %.3g",
                          a.value, a.se));
  return o;
}

Outcome thermal_rate() {
  ConcentrationRuns& r = concentration_runs();
  Outcome o;
  o.details.push_back(fmt("default concentration run: %.1f s, %zu failed grid points", r.seconds, r.one.failures.size()));
  std::vector<Estimate> th = column(r, "thermal_q");
  bool dec = decreasing_within_se(th, o.details, "thermal_q");
  std::vector<ScalingPoint> pts;
  for (std::size_t i = 0; i < th.size(); ++i) {
    double rate = r.s_n[i] * r.config.n_grid[i];
    double scale = std::sqrt(rate);
    pts.push_back({rate, th[i].value * scale, th[i].se * scale});
    o.details.push_back(fmt("n=%d: thermal_q (s_n n)^(1/2) = %.4g +/- %.3g", r.config.n_grid[i], th[i].value * scale,
                            th[i].se * scale));
  }
  FitResult fit = fit_scaling(pts, 1.0);
  bool no_growth = fit.slope <= fit.slope_se;
  o.details.push_back(fmt("trend of the scaled statistic in log(s_n n): slope %.3f +/- %.3f", fit.slope, fit.slope_se));
  o.pass = r.one.failures.empty() && dec && no_growth;
  return o;
}

Outcome asymmetry_rate() {
  ConcentrationRuns& r = concentration_runs();
  Outcome o;
  bool dec = decreasing_within_se(column(r, "asymmetry_q"), o.details, "asymmetry_q");
  o.pass = r.one.failures.empty() && dec;
  return o;
}

Outcome sampler_agreement() {
  Outcome o{true, {}};
  struct Variant {
    std::string label;
    std::shared_ptr<const ModelSpec> model;
    int n;
    double snr;
  };
  std::vector<Variant> variants;
  variants.push_back({"spiked matrix p=2, K=2", model_of(PriorSpec::rademacher(2), SpikedTensorModel{2}), 4, 0.5});
  variants.push_back({"spiked tensor p=3, K=1", model_of(PriorSpec::binary(1, 0.6), SpikedTensorModel{3}), 4, 0.5});
  {
    // Unequal readout weights: with equal ones the posterior is symmetric
    // under swapping the two columns and single-row moves cannot cross.
    KernelSpec k{"gaussian", 0.0, 1.0, {1.0, 0.5}};
    variants.push_back({"glm gaussian, K=2", model_of(PriorSpec::rademacher(2), GlmModel{1.0, k, nullptr}), 3, 0.5});
  }
  {
    KernelSpec k{"noisy_sign", 0.1, 1.0, {}};
    variants.push_back({"glm noisy sign, K=2", model_of(PriorSpec::rademacher(2), GlmModel{1.0, k, nullptr}), 3, 0.5});
  }
  {
    KernelSpec k{"committee", 0.1, 1.0, {}};
    variants.push_back({"noisy committee, K=1", model_of(PriorSpec::rademacher(1), GlmModel{1.5, k, nullptr}), 4, 0.5});
  }
  variants.push_back({"committee, K=1", model_of(PriorSpec::rademacher(1), CommitteeModel{1.0}), 4, 0.5});
  {
    MultiLayerModel ml;
    LayerModel hidden{1.0, KernelSpec{"noisy_sign", 0.1, 1.0, {}}, nullptr};
    LayerModel out{1.0, KernelSpec{"gaussian", 0.0, 0.7, {}}, nullptr};
    ml.layers = {hidden, out};
    variants.push_back({"two-layer, K=1", model_of(PriorSpec::rademacher(1), ml), 3, 0.5});
  }
  variants.push_back({"side channel only, K=2", model_of(PriorSpec::binary(2, 0.7), NoBaseModel{}), 4, 1.0});

  std::uint64_t seed = 1111;
  for (const auto& v : variants) {
    SamplerCheckConfig cfg;
    cfg.model = v.model;
    cfg.n = v.n;
    cfg.snr_scale = v.snr;
    cfg.instances = 20;
    cfg.seed = seed++;
    SamplerCheckResult res = sampler_check(cfg, workers_available());
    o.pass = o.pass && res.pass();
    o.details.push_back(fmt("%-24s %s: %d comparisons, sum z^2 = %.1f (mean %d, limit +%.1f), |z|>3: %d in %d "
                            "instances (limit %d), max |z| %.2f, frozen-series mismatches %d",
                            v.label.c_str(), res.pass() ? "ok  " : "FAIL", res.comparisons, res.chi2, res.comparisons,
                            3.0 * res.chi2_sd, res.beyond_3se, res.flagged_instances,
                            res.flagged_limit, res.max_abs_z, res.mismatched_exact));
  }
  return o;
}

Outcome determinism() {
  ConcentrationRuns& r = concentration_runs();
  Outcome o;
  ExperimentConfig c = r.config;
  c.workers = 8;
  RunReport eight = run_concentration(c);
  std::string a = to_csv(r.one), b = to_csv(eight);
  o.pass = a == b;
  o.details.push_back(fmt("1 worker vs 8 workers: %zu vs %zu CSV bytes, %s", a.size(), b.size(),
                          o.pass ? "bitwise identical" : "DIFFERENT"));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number.
  std::vector<int> only;
  for (int a = 1; a < argc; ++a) only.push_back(std::atoi(argv[a]));
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "exact Nishimori suite on the committee toys", exact_suite},
      {2, "tempered negative control deviates by more than 5 SE", negative_control},
      {3, "E<Q> symmetric within 3 SE", symmetry},
      {4, "E<L> = diag(E<Q>)/2 - E<Q> within 3 SE", l_relation},
      {5, "<L> matches finite differences of F_n", gradient_oracle},
      {6, "square-root derivative matches finite differences", frechet_oracle},
      {7, "perturbed/unperturbed free energy gap of order s_n", base_gap},
      {8, "n Var(F_n) stable across n", free_energy_variance_check},
      {9, "thermal fluctuation decreasing, scaled statistic without growth", thermal_rate},
      {10, "asymmetry statistic decreasing", asymmetry_rate},
      {11, "Gibbs agrees with enumeration", sampler_agreement},
      {12, "1 and 8 workers give bitwise identical CSV", determinism},
  };
  int failed = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.details.push_back(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, secs);
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
