#include <benchmark/benchmark.h>

#include <mmselab/enumeration.hpp>
#include <mmselab/gibbs.hpp>
#include <mmselab/models.hpp>
#include <mmselab/parallel.hpp>
#include <mmselab/rng.hpp>

#include <omp.h>

using namespace mmselab;

namespace {

QuenchedInstance make_instance(int n, int K, std::uint64_t seed) {
  ModelSpec s;
  s.prior = PriorSpec::rademacher(K);
  s.base = SpikedTensorModel{2};
  auto model = make_model(std::move(s));
  SymMatrix b(K);
  for (int l = 0; l < K; ++l) {
    b.set(l, l, 2.0 * K + 0.5);
    for (int lp = l + 1; lp < K; ++lp) b.set(l, lp, 1.5);
  }
  Rng rng(seed);
  return draw_instance(model, n, SnrMatrix(0.5, b), rng);
}

void BM_Enumeration(benchmark::State& state, Execution exec) {
  QuenchedInstance inst = make_instance(static_cast<int>(state.range(0)), 1, 7);
  for (auto _ : state) {
    EnumeratedPosterior post = enumerate_posterior(inst, 1.0, kDefaultEnumerationCap, exec);
    benchmark::DoNotOptimize(post.probabilities().data());
  }
  state.counters["configurations"] = static_cast<double>(std::size_t{1} << state.range(0));
}

// One Gibbs chain per instance, mapped over an ensemble of instances.
void BM_GibbsEnsemble(benchmark::State& state, bool parallel) {
  const int n = static_cast<int>(state.range(0));
  const std::size_t count = 32;
  std::vector<QuenchedInstance> insts;
  for (std::size_t i = 0; i < count; ++i) insts.push_back(make_instance(n, 2, 100 + i));
  const ChainConfig cfg{50, 100, 1};
  const int workers = parallel ? omp_get_max_threads() : 1;
  for (auto _ : state) {
    auto sets = parallel_map(count, workers, [&](std::size_t i) { return sample_replicas(insts[i], 2, cfg, i); });
    benchmark::DoNotOptimize(sets.data());
  }
  state.counters["workers"] = workers;
}

}  // namespace

BENCHMARK_CAPTURE(BM_Enumeration, serial, Execution::Serial)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Enumeration, parallel, Execution::Parallel)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_GibbsEnsemble, serial, false)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_GibbsEnsemble, parallel, true)->Arg(50)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
