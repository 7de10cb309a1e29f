#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "fcco/types.hpp"

namespace fcco {

// Independent random streams are addressed by (seed, iteration, purpose, sub).
// A run draws every batch from its own stream so the sequence of batches does
// not depend on how many function evaluations happen in between.
enum class Purpose : std::uint64_t {
  OuterBatch = 1,
  MiddleBatch = 2,
  InnerBatch = 3,
  Init = 4,
  Probe = 5,
  Synthetic = 6,
  Restart = 7,
};

inline constexpr std::uint64_t kInitIteration = std::numeric_limits<std::uint64_t>::max();

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Counter-based generator: output k is a bijective mix of (key, k).
// Bit-identical across platforms and compilers.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t iteration = 0,
                      Purpose purpose = Purpose::Synthetic, std::uint64_t sub = 0) noexcept;

  std::uint64_t next() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform integer in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;
  // Standard normal by Box-Muller.
  double normal() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline CounterRng stream(std::uint64_t seed, std::uint64_t iteration, Purpose purpose,
                         std::uint64_t sub = 0) {
  return CounterRng(seed, iteration, purpose, sub);
}

// batch_size distinct ids drawn uniformly without replacement from
// [0, population_size). Throws InvalidConfig unless 1 <= batch_size <= population_size.
std::vector<BlockId> sample_blocks(CounterRng& rng, std::size_t population_size,
                                   std::size_t batch_size);

// All ids 0..m-1 in order.
std::vector<BlockId> full_batch(std::size_t m);

}  // namespace fcco
