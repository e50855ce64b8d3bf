#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mmselab/fit.hpp"
#include "mmselab/gibbs.hpp"
#include "mmselab/models.hpp"
#include "mmselab/stats.hpp"

namespace mmselab {

/// s_n = coefficient * n^exponent, unless explicit values (one per grid
/// point) are given.
struct SnSchedule {
  double coefficient = 1.0;
  double exponent = -0.125;
  std::vector<double> values;

  double at(int n, std::size_t index) const;
};

enum class PosteriorBackend { Auto, Enumeration, Gibbs };

struct FluctuationConfig {
  std::shared_ptr<const ModelSpec> model;
  std::vector<int> n_grid;
  SnSchedule s_n;
  int lambda_draws = 16;
  int instances = 64;
  int replicas = 2;
  ChainConfig chain;
  std::uint64_t seed = 0;
  PosteriorBackend backend = PosteriorBackend::Auto;
  /// Auto uses exact enumeration when the support has at most this many points.
  std::size_t enumeration_cap = std::size_t{1} << 16;
};

struct NamedEstimate {
  std::string name;
  Estimate estimate;
};

struct GridPointResult {
  int n = 0;
  double s_n = 0.0;
  bool ok = false;
  std::string error;
  bool exact = false;          // posterior expectations computed by enumeration
  long budget = 0;             // instances x replicas x kept sweeps (instances when exact)
  int unconverged = 0;         // instances whose replicas disagreed
  bool decomposition_ok = true;  // thermal <= total + 3 combined SE
  std::vector<NamedEstimate> stats;

  const Estimate& stat(const std::string& name) const;
};

struct NamedFit {
  std::string statistic;
  std::string rate_variable;  // "s_n*n" or "s_n^4*n"
  double bound_exponent = 0.0;  // exponent of the upper bound in the rate variable
  bool ok = false;
  std::string diagnostic;
  FitResult fit;
};

struct FluctuationReport {
  std::vector<GridPointResult> points;
  std::vector<NamedFit> fits;

  bool any_failed() const;
};

/// Per grid point: lambda_draws values of lambda from s_n D_K, instance i
/// uses lambda draw i % lambda_draws. Reports (each averaged over lambda,
/// SE by delete-one-lambda-group jackknife):
///   thermal_q    E<||Q - <Q>||^2>
///   total_q      E<||Q - E<Q>||^2>
///   asymmetry_q  E<||Q - <Q12>||^2>
///   thermal_l, total_l   the same for L
///   thermal_q_scaled     thermal_q * (s_n n)^{1/2}
///   antisym_q[l][l']      entries of the antisymmetric part of E<Q>
///   l_relation[l][l']     E<L> - (diag(E<Q>)/2 - E<Q>) entrywise
/// Squared posterior means are always estimated from independent blocks
/// (two halves of each replica), never by squaring one estimate.
FluctuationReport fluctuation_decomposition(const FluctuationConfig& config, int workers = 1);

}  // namespace mmselab
