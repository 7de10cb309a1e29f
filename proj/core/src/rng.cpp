#include "fcco/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace fcco {

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t iteration, Purpose purpose,
                       std::uint64_t sub) noexcept {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ iteration);
  k = splitmix64(k ^ static_cast<std::uint64_t>(purpose));
  key_ = splitmix64(k ^ sub);
}

std::uint64_t CounterRng::next() noexcept {
  const std::uint64_t c = counter_++;
  return splitmix64(key_ + c * 0xD1B54A32D192ED03ULL);
}

double CounterRng::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::below(std::uint64_t bound) noexcept {
  // Rejection on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % bound;
}

double CounterRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::vector<BlockId> sample_blocks(CounterRng& rng, std::size_t population_size,
                                   std::size_t batch_size) {
  if (batch_size < 1 || batch_size > population_size) {
    throw InvalidConfig("batch size " + std::to_string(batch_size) +
                        " must lie in [1, " + std::to_string(population_size) + "]");
  }
  if (batch_size * 4 >= population_size) {
    // Partial Fisher-Yates.
    std::vector<BlockId> ids(population_size);
    std::iota(ids.begin(), ids.end(), BlockId{0});
    for (std::size_t k = 0; k < batch_size; ++k) {
      const std::size_t j = k + rng.below(population_size - k);
      std::swap(ids[k], ids[j]);
    }
    ids.resize(batch_size);
    return ids;
  }
  // Floyd's subset sampling, O(batch^2) membership checks for small batches.
  std::vector<BlockId> ids;
  ids.reserve(batch_size);
  for (std::size_t j = population_size - batch_size; j < population_size; ++j) {
    const BlockId t = rng.below(j + 1);
    if (std::find(ids.begin(), ids.end(), t) == ids.end()) {
      ids.push_back(t);
    } else {
      ids.push_back(j);
    }
  }
  return ids;
}

std::vector<BlockId> full_batch(std::size_t m) {
  std::vector<BlockId> ids(m);
  std::iota(ids.begin(), ids.end(), BlockId{0});
  return ids;
}

}  // namespace fcco
