#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmselab/enumeration.hpp"
#include "mmselab/gibbs.hpp"
#include "mmselab/models.hpp"
#include "mmselab/stats.hpp"

namespace mmselab {

/// Posterior expectations needed by the MMSE-type estimators for one
/// quenched instance.
struct PosteriorSummary {
  SignalMatrix truth;
  SignalMatrix mean;          // <x>
  Matrix q_mean;              // <Q>, Q = X^T x / n
  double q_norm2 = 0.0;       // <||Q||_F^2>
  Matrix xxt;                 // <x x^T>, n x n; empty unless requested
  std::optional<Matrix> l_mean;  // <L>, when the instance has a side channel
  bool exact = false;
};

PosteriorSummary summarize(const QuenchedInstance& inst, const EnumeratedPosterior& post, bool with_xxt = false);
/// Plug-in averages over (approximately) independent posterior samples.
PosteriorSummary summarize(const QuenchedInstance& inst, const std::vector<SignalMatrix>& samples, bool with_xxt = false);

/// E[X_1 X_1^T] of the signal prior. Throws for generative priors, whose
/// rows are not i.i.d. draws of a known law.
Matrix signal_second_moment(const ModelSpec& model);

struct MatrixEstimate {
  Matrix value;
  Matrix se;
};

/// Direct form (1/n)E[(X - <x>)^T (X - <x>)] and overlap form
/// E[X_1 X_1^T] - E<Q>, each entrywise with the SE over instances.
struct MmseEstimate {
  MatrixEstimate direct;
  MatrixEstimate overlap_form;
};

MmseEstimate matrix_mmse(const std::vector<PosteriorSummary>& ensemble, const Matrix& second_moment);

struct ScalarMmseEstimate {
  Estimate direct;
  Estimate overlap_form;
};

/// Traces of the two matrix_mmse forms.
ScalarMmseEstimate scalar_mmse(const std::vector<PosteriorSummary>& ensemble, const Matrix& second_moment);

/// lhs = (1/n^2)E||X X^T - <x x^T>||_F^2, rhs = E[(X_1^T X_2)^2] - E<||Q||_F^2>,
/// gap = lhs - rhs (paired per instance). Summaries need `xxt`.
struct TensorMseEstimate {
  Estimate lhs;
  Estimate rhs;
  Estimate gap;
};

TensorMseEstimate tensor_mse(const std::vector<PosteriorSummary>& ensemble, const Matrix& second_moment);

enum class FreeEnergyMethod { Exact, Quadrature, ThermodynamicIntegration };

struct FreeEnergyOptions {
  std::size_t cap = kDefaultEnumerationCap;
  int quadrature_points = 8;  // midpoints per coordinate for the uniform box
  int ti_nodes = 17;          // odd, Simpson rule over beta in [0, 1]
  ChainConfig ti_chain{100, 200, 1};
  std::uint64_t seed = 0;
};

/// Per-component free energy -(1/n) ln sum_x P_0(x) P_out(data|x) e^{-H}.
struct FreeEnergy {
  double value = 0.0;
  double se = 0.0;          // 0 for the exact method
  std::string method;       // exact-enumeration | quadrature | mc-estimate
  bool approximate = false;
};

/// Exact: log-sum-exp over the support (discrete priors). Quadrature:
/// midpoint rule per row for the uniform box, flagged approximate.
/// ThermodynamicIntegration: -(1/n) int_0^1 <ln P_out - H>_beta d beta with
/// Gibbs estimates at each node, reported with an SE.
FreeEnergy free_energy(const QuenchedInstance& inst, FreeEnergyMethod method, const FreeEnergyOptions& options = {});

struct FreeEnergyVariance {
  Estimate variance;
  Estimate mean;
  std::vector<double> values;
};

/// Sample variance of F_n over `replicates` >= 30 independent quenched
/// draws (instance r seeded with derive_seed(seed, {r})).
FreeEnergyVariance free_energy_variance(std::shared_ptr<const ModelSpec> model, int n,
                                        const std::optional<SnrMatrix>& snr, int replicates, std::uint64_t seed,
                                        FreeEnergyMethod method, const FreeEnergyOptions& options = {},
                                        int workers = 1);

/// Plain Monte Carlo average of f over uniform draws of lambda from s_n D_K.
Estimate lambda_average(const std::function<double(const SnrMatrix&)>& f, int K, double s_n, int draws, Rng& rng);

}  // namespace mmselab
