#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmselab/fit.hpp"
#include "mmselab/nishimori.hpp"

namespace mmselab {

/// One CSV row: a statistic at one grid point.
struct Record {
  int n = 0;
  double s_n = 0.0;
  std::string statistic;
  double value = 0.0;
  double se = 0.0;
  bool exact = false;
  long budget = 0;
};

struct FitRecord {
  std::string statistic;
  std::string rate_variable;
  double bound_exponent = 0.0;
  bool ok = false;
  std::string diagnostic;
  FitResult fit;
};

struct RunReport {
  std::string command;
  std::string config_yaml;  // canonical echo, enough to re-run
  std::uint64_t seed = 0;
  int workers = 1;
  std::vector<Record> records;
  std::vector<FitRecord> fits;
  std::vector<IdentityResult> identities;
  std::vector<std::string> failures;  // failed grid points, one message each
  std::string started;                // wall-clock metadata (UTC, ISO 8601)
  double wall_seconds = 0.0;

  bool exact_identity_failed() const;
  bool partial_failure() const { return !failures.empty(); }
};

inline constexpr const char* kCsvHeader = "n,s_n,statistic,value,se,exact,budget";

/// CSV with kCsvHeader; doubles printed with 17 significant digits.
std::string to_csv(const RunReport& report);
std::string to_json(const RunReport& report);
/// Inverse of to_json; every number is recovered bitwise.
RunReport parse_report_json(const std::string& text);

/// Writes report.csv and/or report.json into `dir` (created if missing).
/// Throws std::runtime_error on path failures.
void write_report(const RunReport& report, const std::string& dir, bool csv = true, bool json = true);

/// 0 success, 1 exact-tier identity failure, 3 partial grid failure.
int exit_code(const RunReport& report);

}  // namespace mmselab
