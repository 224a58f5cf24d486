#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "camd/sigsynth/dataset.h"

namespace camd::train {

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;

  // ConfigError unless the fractions are non-negative and sum to 1.
  void validate() const;
};

// Frame indices, each set sorted ascending.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

inline constexpr std::size_t kMinStratumFrames = 5;

// Stratified by (label, snr). Within a stratum of n frames the order is
// shuffled by the seed, then floor(val * n) go to val, floor(test * n) to test
// and the remainder to train. StratumError if any stratum has < 5 frames.
Split split_dataset(const sig::Dataset& d, const SplitSpec& spec);

}  // namespace camd::train
