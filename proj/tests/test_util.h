#pragma once

#include <cstdint>
#include <vector>

#include "camd/common/rng.h"
#include "camd/diffcore/tensor.h"

namespace camd::testing {

template <typename T = double>
diff::Tensor<T> random_tensor(diff::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                              bool requires_grad = false) {
  Rng rng(seed);
  std::vector<T> values(diff::shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(rng.uniform(lo, hi));
  return diff::Tensor<T>(std::move(shape), std::move(values), requires_grad);
}

}  // namespace camd::testing
