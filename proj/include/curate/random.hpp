#pragma once

// Seeded, platform-independent randomness.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Standard distributions are not portable, so bounded draws use
// Lemire's multiply-and-reject method on the raw 64-bit output instead.
// Derived seeds go through SplitMix64.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace curate {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for an independent stream `stream` derived from `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

/// Uniform sample of min(count, |items|) elements without replacement.
/// Partial Fisher-Yates over `items` in the order given; callers pass a
/// canonical order to make the result independent of input permutation.
std::vector<std::string> sample_without_replacement(
    std::span<const std::string> items, std::size_t count, std::uint64_t seed);

}  // namespace curate
