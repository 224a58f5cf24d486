#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camd/model/camd.h"
#include "camd/sigsynth/dataset.h"

namespace camd::train {

// Copies frames into a [B x Nr x L x 2] batch, each frame scaled to unit mean
// power over all antennas and samples (all-zero frames are left as they are).
model::Tensor<float> make_batch(const sig::Dataset& d, std::span<const std::size_t> indices);

struct Scores {
  std::vector<int> predictions;  // argmax of the logits, one per index
  double mean_loss = 0.0;        // mean cross-entropy
};

// Batched inference. Batches are spread over worker_count() threads and the
// loss is summed in batch order, so the result does not depend on the
// thread count.
Scores score(const model::Camd<float>& m, const sig::Dataset& d, std::span<const std::size_t> indices,
             std::size_t batch = 256);

struct SnrStats {
  float snr_db = 0.0f;
  std::size_t frames = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<SnrStats> per_snr;  // ascending SNR, non-empty strata only
  std::size_t frames = 0;
  double overall = 0.0;  // frame-weighted
  double max = 0.0;
  double avg = 0.0;  // unweighted mean over SNRs
  float low_snr_db = -4.0f;
  std::optional<double> low;  // absent when no frame sits at low_snr_db
};

inline constexpr float kDefaultLowSnr = -4.0f;

EvalReport evaluate_predictions(const sig::Dataset& d, std::span<const std::size_t> indices,
                                std::span<const int> predictions, float low_snr_db = kDefaultLowSnr);

EvalReport evaluate(const model::Camd<float>& m, const sig::Dataset& d, std::span<const std::size_t> indices,
                    float low_snr_db = kDefaultLowSnr, std::size_t batch = 256);

std::vector<std::size_t> all_indices(const sig::Dataset& d);

}  // namespace camd::train
