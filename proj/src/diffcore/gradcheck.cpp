#include "camd/diffcore/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "camd/common/rng.h"
#include "camd/diffcore/ops.h"
#include "camd/diffcore/tape.h"

namespace camd::diff {

namespace {

// Scalar objective: the output itself if scalar, else sum(w * y).
Tensor<double> reduce(const Tensor<double>& y, const std::vector<double>& weights) {
  if (y.numel() == 1) return y;
  return sum(mul(y, Tensor<double>(y.shape(), weights)));
}

std::vector<double> probe_weights(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(n);
  for (double& x : w) x = rng.uniform(0.5, 1.5) * (rng.bit() ? 1.0 : -1.0);
  return w;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor<double>()>& fn, std::span<Tensor<double>> inputs,
                           double h, std::uint64_t seed) {
  std::vector<double> weights;
  {
    NoGradScope no_grad;
    weights = probe_weights(fn().numel(), seed);
  }

  for (auto& x : inputs) {
    if (!x.requires_grad()) x.set_requires_grad(true);
    x.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor<double> loss = reduce(fn(), weights);
    backward(loss);
  }

  auto objective = [&](std::uint64_t& pattern) {
    NoGradScope no_grad;
    ReluMarginProbe probe;
    const double v = reduce(fn(), weights).item();
    pattern = probe.pattern();
    return v;
  };
  std::uint64_t base = 0;
  objective(base);

  GradCheckResult result;
  for (auto& x : inputs) {
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double original = x.data()[i];
      const double step = h * std::max(1.0, std::abs(original));
      double f[4];
      bool kink = false;
      const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
      for (int k = 0; k < 4; ++k) {
        x.data()[i] = original + offsets[k] * step;
        std::uint64_t pattern = 0;
        f[k] = objective(pattern);
        kink = kink || pattern != base;
      }
      x.data()[i] = original;
      if (kink) {
        ++result.kink_skipped;
        continue;
      }
      const double numeric = (8.0 * (f[1] - f[2]) - (f[0] - f[3])) / (12.0 * step);
      const double analytic = x.grad()[i];
      const double err = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      result.max_relative_error = std::max(result.max_relative_error, err);
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace camd::diff
