#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mmselab/models.hpp"

namespace mmselab {

struct ChainConfig {
  int burn_in = 1000;
  int kept_sweeps = 1000;
  int thinning = 10;
  /// Random-walk settings, used only for continuous priors.
  double initial_step = 0.5;
  double target_acceptance = 0.3;
};

class RowEngine;

/// Markov chain on x with the (possibly tempered) posterior as stationary
/// law. Discrete priors are updated by exact row-conditional Gibbs; the
/// uniform-box prior by per-row random-walk Metropolis, whose step adapts
/// only while `adapt` is passed to sweep() (burn-in) and is frozen after.
/// Models with deterministic output channels also get one whole-configuration
/// proposal from the prior per sweep.
/// The instance must outlive the chain.
class GibbsChain {
 public:
  /// Starts from a prior draw with positive posterior weight (up to 10^4
  /// attempts, then std::runtime_error).
  GibbsChain(const QuenchedInstance& inst, std::uint64_t seed, double beta = 1.0);
  GibbsChain(const QuenchedInstance& inst, SignalMatrix initial, std::uint64_t seed, double beta = 1.0);
  ~GibbsChain();
  GibbsChain(GibbsChain&&) noexcept;
  GibbsChain& operator=(GibbsChain&&) noexcept;

  const SignalMatrix& state() const { return x_; }
  long sweeps() const { return sweeps_; }
  double beta() const { return beta_; }
  double step() const { return step_; }
  /// Metropolis acceptance rate since the last adaptation; 1 for Gibbs.
  double acceptance_rate() const;

  void sweep(bool adapt = false);

  /// Changes the likelihood temperature; the state is kept (warm start).
  void set_beta(double beta);

  /// Random-walk step and acceptance target (continuous priors only).
  void configure(const ChainConfig& config);

 private:
  void init_engine();
  void global_move();

  const QuenchedInstance* inst_;
  SignalMatrix x_;
  Rng rng_;
  double beta_;
  double step_;
  double target_ = 0.3;
  long sweeps_ = 0;
  long proposals_ = 0;
  long accepted_ = 0;
  bool hard_constraints_ = false;
  std::unique_ptr<RowEngine> engine_;
};

/// One full pass over the rows.
void gibbs_sweep(GibbsChain& chain);

struct ReplicaSamples {
  std::vector<SignalMatrix> samples;
  double acceptance = 1.0;
  double step = 0.0;
};

struct ReplicaSet {
  std::vector<ReplicaSamples> replicas;
  bool converged = true;
  std::string diagnostic;
};

/// Runs `count` independent chains seeded with derive_seed(seed, {r}) and
/// keeps every `thinning`-th state after burn-in. Chains whose means of
/// ||x||_F^2 disagree by more than 5 combined standard errors are flagged as
/// not converged (the samples are still returned).
ReplicaSet sample_replicas(const QuenchedInstance& inst, int count, const ChainConfig& config, std::uint64_t seed,
                           double beta = 1.0);

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means (falls back to the naive SE when there are fewer than 4
/// batches).
double batch_means_se(const std::vector<double>& series, int batches = 20);

}  // namespace mmselab
