#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camd/model/config.h"

namespace camd::model {

struct GradCheckRow {
  std::string name;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  std::size_t coordinates = 0;
  std::size_t kink_skipped = 0;
  // At most 5% of the probed coordinates may be dropped for kink crossings.
  bool passed() const { return max_relative_error <= tolerance && kink_skipped * 20 <= coordinates + kink_skipped; }
};

inline constexpr double kOpTolerance = 1e-4;
inline constexpr double kEndToEndTolerance = 1e-3;
inline constexpr double kOpStep = 1e-6;
inline constexpr double kEndToEndStep = 1e-4;
inline constexpr double kEndToEndKinkMargin = 1e-4;

// Every differentiable primitive plus the model layers, float64, h = 1e-6.
std::vector<GradCheckRow> op_gradchecks(std::uint64_t seed = 1);

// Whole-network check on the tiny configuration: loss = cross-entropy of a
// random batch, every parameter probed. The compensation head is randomized
// so the compensation path carries non-trivial gradients. The larger step
// keeps roundoff on gradients near 1e-9 below the tolerance; batches with a
// relu input closer than kEndToEndKinkMargin to zero are redrawn.
GradCheckRow end_to_end_gradcheck(Variant variant, std::uint64_t seed = 1, double h = kEndToEndStep);

// op_gradchecks followed by the end-to-end check of every variant.
std::vector<GradCheckRow> full_gradcheck_suite(std::uint64_t seed = 1);

}  // namespace camd::model
