#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "visern/matrix.hpp"

namespace visern {

/// Deterministic generator keyed by (seed, stream name).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Distributions are implemented here rather than through
/// <random>'s distribution classes, whose algorithms differ between
/// standard library vendors.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view stream);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent child stream; depends only on (seed, parent stream, name).
  Rng fork(std::string_view name) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller.
  double normal();

  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);
  Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  Rng(std::uint64_t seed, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t key_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

}  // namespace visern
