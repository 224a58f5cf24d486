#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "camd/diffcore/tensor.h"

namespace camd::diff {

struct AdamWOptions {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
};

// First/second moments per parameter plus the step counter.
template <typename T>
struct AdamWState {
  AdamWOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  static AdamWState for_params(std::span<const Tensor<T>> params, AdamWOptions options);
};

// One AdamW update from the parameters' accumulated gradients. Weight decay is
// decoupled: p <- p * (1 - lr * wd) first, then the bias-corrected adaptive step.
template <typename T>
void adamw_step(std::span<Tensor<T>> params, AdamWState<T>& state);

}  // namespace camd::diff
