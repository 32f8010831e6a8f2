#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace ctlp {

std::uint64_t mix64(std::uint64_t x);

// Derives an independent stream key from a parent seed and a tuple of labels.
std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);
std::uint64_t derive_key(std::uint64_t seed, std::string_view purpose);

/// Counter-based generator: draw i of stream `key` is a pure function of
/// (key, i), so results do not depend on platform, library or thread layout.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double next_unit();
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  double normal();

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates permutation of [0, n) driven by CounterRng(key).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t key);

}  // namespace ctlp
