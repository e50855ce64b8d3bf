#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mmselab/config.hpp"
#include "mmselab/experiments.hpp"
#include "mmselab/fit.hpp"
#include "mmselab/report.hpp"

using namespace mmselab;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mmselab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(MMSELAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string minimal_config() { return std::string(MMSELAB_SOURCE_DIR) + "/configs/minimal.yaml"; }

const char* kTiny = R"(
model: {variant: spiked_tensor, order: 2}
prior: {kind: rademacher, K: 1}
schedule:
  n_grid: [4, 5, 6]
  lambda_draws: 2
sampler: {backend: enumeration}
budget: {instances: 4}
seed: 5
identities:
  exact: [{n: 2, K: 1}]
  mc: []
free_energy: {replicates: 30}
)";

}  // namespace

TEST_CASE("fit_scaling recovers an exact power law") {
  std::vector<ScalingPoint> pts;
  for (double v : {10.0, 20.0, 40.0, 80.0, 160.0}) pts.push_back({v, 3.0 * std::pow(v, -0.5), 0.0});
  FitResult f = fit_scaling(pts);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(f.constant == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_FALSE(f.weighted);
  CHECK_FALSE(f.degenerate);
  for (double r : f.residuals) CHECK(std::abs(r) < 1e-12);
}

TEST_CASE("fit_scaling with 5% noise covers the true slope") {
  Rng rng(4);
  std::vector<ScalingPoint> pts;
  for (double v : {10.0, 20.0, 40.0, 80.0, 160.0, 320.0}) {
    double y = 2.0 * std::pow(v, -1.0);
    pts.push_back({v, y * (1.0 + 0.05 * rng.normal()), 0.05 * y});
  }
  FitResult f = fit_scaling(pts);
  CHECK(f.weighted);
  CHECK(f.ci_low <= -1.0);
  CHECK(f.ci_high >= -1.0);
  CHECK(f.ci_high - f.ci_low == doctest::Approx(6 * f.slope_se));
}

TEST_CASE("fit_scaling rejects bad input and flags degenerate designs") {
  CHECK_THROWS_AS(fit_scaling({{1, 1, 0}, {2, 1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_scaling({{1, 1, 0}, {2, -1, 0}, {3, 1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_scaling({{0, 1, 0}, {2, 1, 0}, {3, 1, 0}}), std::invalid_argument);
  FitResult same = fit_scaling({{5, 1, 0.1}, {5, 2, 0.1}, {5, 3, 0.1}});
  CHECK(same.degenerate);
  CHECK(std::isnan(same.slope));
  FitResult two = fit_scaling({{5, 1, 0.1}, {5, 2, 0.1}, {10, 3, 0.1}});
  CHECK(two.degenerate);
}

TEST_CASE("config parsing") {
  ExperimentConfig c = parse_config(kTiny);
  CHECK(c.n_grid == std::vector<int>{4, 5, 6});
  CHECK(c.seed.value() == 5);
  CHECK(c.backend == PosteriorBackend::Enumeration);
  CHECK(c.model.K() == 1);
  CHECK(c.identities.exact.size() == 1);
  CHECK(c.identities.mc.empty());
  validate(c);

  // canonical echo is a fixed point
  std::string y = to_yaml(c);
  CHECK(to_yaml(parse_config(y)) == y);

  CHECK_THROWS_AS(parse_config("seed: 1\nbogus: 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed: 1\nsampler: {burn: 3}\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed: [1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(""), ConfigError);
  CHECK_THROWS_AS(parse_config("seed: -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("prior: {kind: gaussian}\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("sampler: {backend: amp}\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);

  ExperimentConfig d = parse_config("schedule: {n_grid: [10, 10]}\nseed: 1\n");
  CHECK_THROWS_AS(validate(d), ConfigError);
  ExperimentConfig e = parse_config("budget: {instances: 0}\nseed: 1\n");
  CHECK_THROWS_AS(validate(e), ConfigError);
  ExperimentConfig f = parse_config("budget: {instances: 3}\n");
  CHECK_THROWS_AS(validate(f), ConfigError);
}

TEST_CASE("CSV and JSON reports") {
  RunReport empty;
  empty.command = "concentration";
  CHECK(to_csv(empty) == std::string(kCsvHeader) + "\n");
  CHECK(std::string(kCsvHeader) == "n,s_n,statistic,value,se,exact,budget");
  auto j = nlohmann::json::parse(to_json(empty));
  CHECK(j["records"].empty());

  RunReport r;
  r.command = "concentration";
  r.seed = 18446744073709551615ull;
  r.records.push_back({25, 0.1 + 0.2, "thermal_q", 1.0 / 3.0, std::nextafter(0.1, 1.0), true, 64});
  r.records.push_back({50, 1e-300, "total_q", std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::infinity(), false, 6400});
  FitRecord fr;
  fr.statistic = "thermal_q";
  fr.rate_variable = "s_n*n";
  fr.fit.slope = -0.4999999999999999;
  fr.fit.residuals = {1e-17, -2.5};
  r.fits.push_back(fr);
  r.identities.push_back({"toy", "Q[0][0]", "exact", 1e-17, 0.0, 1e-10, 4, Verdict::Pass});
  r.failures.push_back("n=100: cap");

  RunReport back = parse_report_json(to_json(r));
  REQUIRE(back.records.size() == 2);
  CHECK(back.seed == r.seed);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.records[i].n == r.records[i].n);
    CHECK(std::memcmp(&back.records[i].s_n, &r.records[i].s_n, sizeof(double)) == 0);
    CHECK(back.records[i].statistic == r.records[i].statistic);
    CHECK(back.records[i].exact == r.records[i].exact);
    CHECK(back.records[i].budget == r.records[i].budget);
  }
  CHECK(std::memcmp(&back.records[0].value, &r.records[0].value, sizeof(double)) == 0);
  CHECK(std::memcmp(&back.records[0].se, &r.records[0].se, sizeof(double)) == 0);
  CHECK(std::isnan(back.records[1].value));
  CHECK(std::isinf(back.records[1].se));
  CHECK(back.fits[0].fit.slope == r.fits[0].fit.slope);
  CHECK(back.fits[0].fit.residuals == r.fits[0].fit.residuals);
  CHECK(back.identities[0].verdict == Verdict::Pass);
  CHECK(back.failures == r.failures);
  CHECK(to_json(back) == to_json(r));

  std::string csv = to_csv(r);
  CHECK(csv.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  CHECK(csv.find("25,0.30000000000000004,thermal_q,0.33333333333333331,") != std::string::npos);
  CHECK(csv.find(",true,64\n") != std::string::npos);

  fs::path dir = scratch("report") / "nested";
  write_report(r, dir.string());
  CHECK(read_file(dir / "report.csv") == csv);
  CHECK(fs::exists(dir / "report.json"));
}

TEST_CASE("exit codes from reports") {
  RunReport ok;
  CHECK(exit_code(ok) == 0);
  RunReport partial;
  partial.failures.push_back("n=8: boom");
  CHECK(exit_code(partial) == 3);
  RunReport bad = partial;
  bad.identities.push_back({"toy", "Q", "exact", 1.0, 0.0, 1e-10, 1, Verdict::Fail});
  CHECK(exit_code(bad) == 1);
  RunReport control;
  control.identities.push_back({"toy", "Q", "control", 0.0, 0.1, 0.0, 100, Verdict::Fail});
  CHECK(exit_code(control) == 0);
}

TEST_CASE("identity suite verdicts") {
  CHECK(mc_verdict(0.01, 0.01, 20, 0.1, false) == Verdict::Inconclusive);
  CHECK(mc_verdict(0.01, 0.5, 2000, 0.1, false) == Verdict::Inconclusive);
  CHECK(mc_verdict(0.01, 0.01, 2000, 0.1, false) == Verdict::Pass);
  CHECK(mc_verdict(0.05, 0.01, 2000, 0.1, false) == Verdict::Fail);
  CHECK(mc_verdict(0.06, 0.01, 2000, 0.1, true) == Verdict::Pass);
  CHECK(mc_verdict(0.04, 0.01, 2000, 0.1, true) == Verdict::Fail);

  for (const auto& r : exact_nishimori_committee({3, 1, 1.0, 0.0, 1.0})) {
    CHECK(r.tier == "exact");
    CHECK(r.deviation < 1e-10);
    CHECK(r.verdict == Verdict::Pass);
  }
  ExperimentConfig c = parse_config(kTiny);
  RunReport rep = run_identity_suite(c);
  CHECK(exit_code(rep) == 0);
  CHECK_FALSE(rep.identities.empty());
}

TEST_CASE("concentration run on the minimal config") {
  ExperimentConfig c = load_config(minimal_config());
  validate(c);
  RunReport r = run_concentration(c);
  CHECK(r.failures.empty());
  CHECK_FALSE(r.records.empty());
  for (const auto& rec : r.records) CHECK(rec.exact);
  bool has_fit = false;
  for (const auto& f : r.fits) has_fit = has_fit || f.statistic == "thermal_q";
  CHECK(has_fit);
  CHECK(parse_config(r.config_yaml).seed == c.seed);
}

TEST_CASE("runs are independent of the worker count") {
  ExperimentConfig c = parse_config(kTiny);
  c.backend = PosteriorBackend::Gibbs;
  c.chain = ChainConfig{10, 20, 2};
  c.workers = 1;
  RunReport a = run_concentration(c);
  c.workers = 4;
  RunReport b = run_concentration(c);
  CHECK(to_csv(a) == to_csv(b));
  c.workers = 1;
  std::string f1 = to_csv(run_free_energy(c));
  c.workers = 3;
  CHECK(to_csv(run_free_energy(c)) == f1);
}

TEST_CASE("mmse sweep and free energy records") {
  ExperimentConfig c = parse_config(kTiny);
  RunReport m = run_mmse_sweep(c);
  CHECK(m.failures.empty());
  bool scalar = false, tensor = false;
  for (const auto& rec : m.records) {
    scalar = scalar || rec.statistic == "scalar_mmse_direct";
    tensor = tensor || rec.statistic == "tensor_mse_gap";
  }
  CHECK(scalar);
  CHECK(tensor);
  RunReport f = run_free_energy(c);
  CHECK(f.failures.empty());
  for (const auto& rec : f.records) CHECK(rec.budget == 30);
}

TEST_CASE("command line exit codes") {
  fs::path dir = scratch("cli");
  CHECK(run_cli("concentration --config " + minimal_config() + " --out " + (dir / "c").string()) == 0);
  CHECK(fs::exists(dir / "c" / "report.csv"));
  CHECK(read_file(dir / "c" / "report.csv").rfind(std::string(kCsvHeader) + "\n", 0) == 0);

  CHECK(run_cli("identities --config " + minimal_config() + " --seed 3 --workers 2 --out " + (dir / "i").string()) ==
        0);

  std::ofstream(dir / "bad.yaml") << "seed: 1\nnot_a_key: 3\n";
  CHECK(run_cli("concentration --config " + (dir / "bad.yaml").string()) == 2);
  CHECK(run_cli("concentration --config /nonexistent.yaml") == 2);
  CHECK(run_cli("concentration") == 2);
  CHECK(run_cli("concentration --config " + minimal_config() + " --workers lots") == 2);

  std::ofstream(dir / "noseed.yaml") << "budget: {instances: 2}\n";
  CHECK(run_cli("mmse-sweep --config " + (dir / "noseed.yaml").string()) == 2);

  // the second grid point exceeds the enumeration cap
  std::ofstream(dir / "partial.yaml") << "prior: {kind: rademacher, K: 2}\n"
                                         "schedule: {n_grid: [3, 20], lambda_draws: 2}\n"
                                         "sampler: {backend: enumeration}\n"
                                         "budget: {instances: 4}\nseed: 2\n";
  CHECK(run_cli("concentration --config " + (dir / "partial.yaml").string() + " --out " + (dir / "p").string()) == 3);
}
