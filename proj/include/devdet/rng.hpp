#pragma once

// Portable random streams. std:: distributions are implementation-defined,
// so uniform/normal draws are derived from raw mt19937_64 output here.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace devdet {

std::uint64_t splitmix64(std::uint64_t x);

// Seed of a named substream of `root` ("pretrain", "stage1", ...).
std::uint64_t substream(std::uint64_t root, std::string_view name);

// Seed of the index-th element stream of `root` (per-sample generation).
std::uint64_t substream(std::uint64_t root, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace devdet
