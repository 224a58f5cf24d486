#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "camd/diffcore/tensor.h"

namespace camd::diff {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  // Coordinates left out because a +-step flipped some relu.
  std::size_t kink_skipped = 0;
};

// Compares reverse-mode gradients of `fn` with fourth-order central
// differences (steps of +-h and +-2h).
//
// `fn` must compute its output from the handles in `inputs` (it is re-run after
// each in-place perturbation). Non-scalar outputs are reduced with fixed
// pseudo-random weights so every output entry contributes. Each coordinate is
// stepped by h * max(1, |x|); the error per coordinate is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// A coordinate whose steps change the relu on/off pattern is not compared
// (the difference quotient straddles a kink); it is counted in kink_skipped.
GradCheckResult grad_check(const std::function<Tensor<double>()>& fn, std::span<Tensor<double>> inputs,
                           double h = 1e-6, std::uint64_t seed = 0x5eed);

}  // namespace camd::diff
