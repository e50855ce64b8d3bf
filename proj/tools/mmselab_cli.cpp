#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mmselab/config.hpp"
#include "mmselab/experiments.hpp"
#include "mmselab/report.hpp"

namespace {

constexpr int kConfigError = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "YAML experiment configuration")->required();
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--workers", o.workers, "number of worker threads (overrides the config)");
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
}

void print_summary(const mmselab::RunReport& r, const std::string& dir) {
  std::printf("%s: %zu statistics, %zu failed grid points, %.1f s\n", r.command.c_str(), r.records.size(),
              r.failures.size(), r.wall_seconds);
  for (const auto& f : r.failures) std::printf("  failed: %s\n", f.c_str());
  for (const auto& id : r.identities) {
    std::printf("  [%s] %-13s %s | %s  deviation=%.3g se=%.3g\n", mmselab::to_string(id.verdict).c_str(),
                id.tier.c_str(), id.family.c_str(), id.identity.c_str(), id.deviation, id.se);
  }
  for (const auto& f : r.fits) {
    if (f.ok)
      std::printf("  fit %-12s vs %-8s slope %.3f +/- %.3f (bound exponent %.3f)\n", f.statistic.c_str(),
                  f.rate_variable.c_str(), f.fit.slope, f.fit.slope_se, f.bound_exponent);
    else
      std::printf("  fit %-12s not available: %s\n", f.statistic.c_str(), f.diagnostic.c_str());
  }
  std::printf("report written to %s\n", dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concentration and Nishimori-identity experiments for multi-dimensional inference models"};
  app.require_subcommand(1);
  Options opts;
  CLI::App* conc = app.add_subcommand("concentration", "overlap and L-matrix fluctuation decomposition over an n grid");
  CLI::App* ident = app.add_subcommand("identities", "exact and Monte Carlo Nishimori identity suites");
  CLI::App* fe = app.add_subcommand("free-energy", "free energies, their variance and the base/perturbed gap");
  CLI::App* mmse = app.add_subcommand("mmse-sweep", "matrix, scalar and tensor MMSE over an n grid");
  for (CLI::App* c : {conc, ident, fe, mmse}) add_common(c, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  mmselab::ExperimentConfig cfg;
  try {
    cfg = mmselab::load_config(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.workers) cfg.workers = *opts.workers;
    if (opts.out) cfg.output.dir = *opts.out;
    mmselab::validate(cfg);
  } catch (const mmselab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  mmselab::RunReport report;
  try {
    if (*conc)
      report = mmselab::run_concentration(cfg);
    else if (*ident)
      report = mmselab::run_identity_suite(cfg);
    else if (*fe)
      report = mmselab::run_free_energy(cfg);
    else
      report = mmselab::run_mmse_sweep(cfg);
  } catch (const std::invalid_argument& e) {
    // inconsistent settings that only show up once the run is assembled
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    mmselab::write_report(report, cfg.output.dir, cfg.output.csv, cfg.output.json);
  } catch (const std::exception& e) {
    std::cerr << "cannot write report: " << e.what() << "\n";
    return kConfigError;
  }
  print_summary(report, cfg.output.dir);
  return mmselab::exit_code(report);
}
