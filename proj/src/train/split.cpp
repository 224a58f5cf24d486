#include "camd/train/split.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "camd/common/error.h"
#include "camd/common/rng.h"

namespace camd::train {

void SplitSpec::validate() const {
  if (train < 0 || val < 0 || test < 0) throw ConfigError("split fractions must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

namespace {

// floor(f * n) that survives 0.2 * 10 = 2.0000000000000004 and friends.
std::size_t share(double f, std::size_t n) { return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9)); }

}  // namespace

Split split_dataset(const sig::Dataset& d, const SplitSpec& spec) {
  spec.validate();
  std::map<std::pair<std::uint16_t, float>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < d.frames.size(); ++i) strata[{d.frames[i].label, d.frames[i].snr_db}].push_back(i);

  Split out;
  std::uint64_t stratum = 0;
  for (auto& [key, idx] : strata) {
    if (idx.size() < kMinStratumFrames) {
      throw StratumError("stratum (label " + std::to_string(key.first) + ", " + std::to_string(key.second) +
                         " dB) has " + std::to_string(idx.size()) + " frames; at least " +
                         std::to_string(kMinStratumFrames) + " are needed");
    }
    Rng rng(derive_seed(spec.seed, stratum++));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);

    const std::size_t n_val = share(spec.val, idx.size());
    const std::size_t n_test = share(spec.test, idx.size());
    auto it = idx.begin();
    out.val.insert(out.val.end(), it, it + n_val);
    it += n_val;
    out.test.insert(out.test.end(), it, it + n_test);
    it += n_test;
    out.train.insert(out.train.end(), it, idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace camd::train
