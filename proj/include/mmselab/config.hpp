#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmselab/estimators.hpp"
#include "mmselab/fluctuations.hpp"
#include "mmselab/gibbs.hpp"
#include "mmselab/models.hpp"
#include "mmselab/nishimori.hpp"

namespace mmselab {

/// Any problem with a configuration file or its values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One Monte Carlo identity family: its own model, size and side channel.
struct McIdentityEntry {
  std::string name;
  ModelSpec model{PriorSpec::rademacher(2), SpikedTensorModel{2}, WeightDist::Gaussian, std::nullopt};
  int n = 3;
  double snr_scale = 0.0;  // lambda = snr_scale * (a seeded draw from D_K); 0 means no side channel
  int draws = 1000;
  double temperature = 1.0;
  bool control = false;
  double resolution = 0.02;
};

struct IdentitySuiteConfig {
  std::vector<CommitteeToy> exact;
  std::vector<McIdentityEntry> mc;
};

struct FreeEnergyRunConfig {
  std::string method = "exact";  // exact | quadrature | thermodynamic
  int replicates = 200;
  bool base = true;  // also compute the unperturbed free energy
  FreeEnergyOptions options;
};

struct MmseRunConfig {
  bool side_channel = true;
  bool tensor = true;
};

struct OutputConfig {
  std::string dir = "out";
  bool csv = true;
  bool json = true;
};

struct ExperimentConfig {
  ModelSpec model{PriorSpec::rademacher(2), SpikedTensorModel{2}, WeightDist::Gaussian, std::nullopt};
  std::vector<int> n_grid{25, 50, 100, 200};
  SnSchedule s_n;
  int lambda_draws = 16;
  ChainConfig chain;
  int replicas = 2;
  PosteriorBackend backend = PosteriorBackend::Auto;
  std::size_t enumeration_cap = std::size_t{1} << 16;
  int instances = 64;
  int workers = 1;
  std::optional<std::uint64_t> seed;
  OutputConfig output;
  IdentitySuiteConfig identities;
  FreeEnergyRunConfig free_energy;
  MmseRunConfig mmse;
};

/// Parses YAML text. Unknown keys, wrong types and out-of-range values
/// raise ConfigError. A missing seed is allowed here (it may come from the
/// command line); validate() rejects it.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::string& path);

/// Checks the cross-field invariants: strictly increasing n grid, budgets
/// >= 1, master seed present.
void validate(const ExperimentConfig& config);

/// Canonical YAML for the configuration; parse_config(to_yaml(c)) gives an
/// equivalent configuration.
std::string to_yaml(const ExperimentConfig& config);

/// Default identity suite: the exact committee toys, the spiked Wigner side
/// channel family and the tempered noisy-committee control.
IdentitySuiteConfig default_identity_suite();

}  // namespace mmselab
