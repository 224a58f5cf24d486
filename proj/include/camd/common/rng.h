#pragma once

#include <cstdint>
#include <random>

namespace camd {

// Identifier written into dataset headers. Generator 1 is std::mt19937_64 with
// the conversions implemented below (53-bit uniforms, Box-Muller normals); the
// standard library distributions are avoided because their output is
// implementation-defined.
inline constexpr std::uint32_t kRngId = 1;

// SplitMix64 finalizer over (master, index). Used to give every frame, run and
// worker an independent stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform();

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  // Standard normal.
  double normal();

  bool bit() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Fisher-Yates shuffle driven by Rng::below, stable across standard libraries.
template <typename Container>
void shuffle(Container& items, Rng& rng) {
  using std::swap;
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    swap(items[i - 1], items[j]);
  }
}

}  // namespace camd
