#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mmselab {

/// Mixes a master seed with a list of counters (instance, replica, lambda
/// draw, ...) into an independent stream seed. Pure function of its inputs,
/// so the stream a task receives never depends on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> counters);

/// One random stream. Owned by exactly one chain / task.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return normal_(engine_); }
  int index(int count) { return std::uniform_int_distribution<int>(0, count - 1)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace mmselab
