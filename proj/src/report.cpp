#include "mmselab/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mmselab {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

double as_num(const json& j) {
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::runtime_error("report: bad number '" + s + "'");
  }
  return j.get<double>();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Verdict parse_verdict(const std::string& s) {
  if (s == "pass") return Verdict::Pass;
  if (s == "fail") return Verdict::Fail;
  return Verdict::Inconclusive;
}

}  // namespace

bool RunReport::exact_identity_failed() const {
  for (const auto& r : identities)
    if (r.tier == "exact" && r.verdict == Verdict::Fail) return true;
  return false;
}

std::string to_csv(const RunReport& report) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : report.records) {
    out += std::to_string(r.n) + "," + fmt(r.s_n) + "," + csv_field(r.statistic) + "," + fmt(r.value) + "," + fmt(r.se) +
           "," + (r.exact ? "true" : "false") + "," + std::to_string(r.budget) + "\n";
  }
  return out;
}

std::string to_json(const RunReport& report) {
  json j;
  j["command"] = report.command;
  j["config_yaml"] = report.config_yaml;
  j["seed"] = report.seed;
  j["workers"] = report.workers;
  j["records"] = json::array();
  for (const auto& r : report.records)
    j["records"].push_back({{"n", r.n}, {"s_n", num(r.s_n)}, {"statistic", r.statistic}, {"value", num(r.value)},
                            {"se", num(r.se)}, {"exact", r.exact}, {"budget", r.budget}});
  j["fits"] = json::array();
  for (const auto& f : report.fits) {
    json res = json::array();
    for (double v : f.fit.residuals) res.push_back(num(v));
    j["fits"].push_back({{"statistic", f.statistic},
                         {"rate_variable", f.rate_variable},
                         {"bound_exponent", num(f.bound_exponent)},
                         {"ok", f.ok},
                         {"diagnostic", f.diagnostic},
                         {"slope", num(f.fit.slope)},
                         {"slope_se", num(f.fit.slope_se)},
                         {"ci_low", num(f.fit.ci_low)},
                         {"ci_high", num(f.fit.ci_high)},
                         {"log_constant", num(f.fit.log_constant)},
                         {"constant", num(f.fit.constant)},
                         {"chi2", num(f.fit.chi2)},
                         {"residuals", res},
                         {"weighted", f.fit.weighted},
                         {"degenerate", f.fit.degenerate}});
  }
  j["identities"] = json::array();
  for (const auto& r : report.identities)
    j["identities"].push_back({{"family", r.family},
                               {"identity", r.identity},
                               {"tier", r.tier},
                               {"deviation", num(r.deviation)},
                               {"se", num(r.se)},
                               {"tolerance", num(r.tolerance)},
                               {"draws", r.draws},
                               {"verdict", to_string(r.verdict)}});
  j["failures"] = report.failures;
  j["metadata"] = {{"started", report.started}, {"wall_seconds", num(report.wall_seconds)}};
  return j.dump(2) + "\n";
}

RunReport parse_report_json(const std::string& text) {
  json j = json::parse(text);
  RunReport r;
  r.command = j.at("command").get<std::string>();
  r.config_yaml = j.at("config_yaml").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.workers = j.at("workers").get<int>();
  for (const auto& x : j.at("records"))
    r.records.push_back({x.at("n").get<int>(), as_num(x.at("s_n")), x.at("statistic").get<std::string>(),
                         as_num(x.at("value")), as_num(x.at("se")), x.at("exact").get<bool>(), x.at("budget").get<long>()});
  for (const auto& x : j.at("fits")) {
    FitRecord f;
    f.statistic = x.at("statistic").get<std::string>();
    f.rate_variable = x.at("rate_variable").get<std::string>();
    f.bound_exponent = as_num(x.at("bound_exponent"));
    f.ok = x.at("ok").get<bool>();
    f.diagnostic = x.at("diagnostic").get<std::string>();
    f.fit.slope = as_num(x.at("slope"));
    f.fit.slope_se = as_num(x.at("slope_se"));
    f.fit.ci_low = as_num(x.at("ci_low"));
    f.fit.ci_high = as_num(x.at("ci_high"));
    f.fit.log_constant = as_num(x.at("log_constant"));
    f.fit.constant = as_num(x.at("constant"));
    f.fit.chi2 = as_num(x.at("chi2"));
    for (const auto& v : x.at("residuals")) f.fit.residuals.push_back(as_num(v));
    f.fit.weighted = x.at("weighted").get<bool>();
    f.fit.degenerate = x.at("degenerate").get<bool>();
    f.fit.diagnostic = f.diagnostic;
    r.fits.push_back(f);
  }
  for (const auto& x : j.at("identities")) {
    IdentityResult id;
    id.family = x.at("family").get<std::string>();
    id.identity = x.at("identity").get<std::string>();
    id.tier = x.at("tier").get<std::string>();
    id.deviation = as_num(x.at("deviation"));
    id.se = as_num(x.at("se"));
    id.tolerance = as_num(x.at("tolerance"));
    id.draws = x.at("draws").get<long>();
    id.verdict = parse_verdict(x.at("verdict").get<std::string>());
    r.identities.push_back(id);
  }
  r.failures = j.at("failures").get<std::vector<std::string>>();
  r.started = j.at("metadata").at("started").get<std::string>();
  r.wall_seconds = as_num(j.at("metadata").at("wall_seconds"));
  return r;
}

void write_report(const RunReport& report, const std::string& dir, bool csv, bool json_out) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  auto write = [&](const std::string& name, const std::string& body) {
    fs::path p = fs::path(dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << body;
    if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
  };
  if (csv) write("report.csv", to_csv(report));
  if (json_out) write("report.json", to_json(report));
}

int exit_code(const RunReport& report) {
  if (report.exact_identity_failed()) return 1;
  if (report.partial_failure()) return 3;
  return 0;
}

}  // namespace mmselab
