#pragma once

// Training scenarios shared by the unit tests and the acceptance binary.

#include <chrono>
#include <cstdint>
#include <vector>

#include "camd/model/camd.h"
#include "camd/sigsynth/dataset.h"
#include "camd/train/evaluate.h"
#include "camd/train/split.h"
#include "camd/train/trainer.h"

namespace camd::testing {

// 32 frames: four classes x 8 at 20 dB, L = 16, 2x2.
inline sig::Dataset overfit_toy_set(std::uint64_t seed = 3) {
  sig::DatasetSpec spec;
  spec.classes = {"bpsk", "qpsk", "psk8", "qam16"};
  spec.length = 16;
  spec.snr_db = {20.0};
  spec.frames_per_stratum = 8;
  spec.seed = seed;
  return sig::generate_dataset(spec);
}

struct OverfitResult {
  std::size_t first_perfect_epoch = 0;  // 0: never reached 100%
  double final_loss = 0.0;
  double seconds = 0.0;
};

// Tiny config trained on the toy set, full batch, scored on itself each epoch.
inline OverfitResult run_overfit(std::uint64_t seed = 1, std::size_t epochs = 300) {
  const auto t0 = std::chrono::steady_clock::now();
  const sig::Dataset d = overfit_toy_set();
  model::ModelConfig cfg = model::tiny_config();
  cfg.num_classes = d.num_classes();
  train::TrainHyper h;
  h.batch = 32;
  h.epochs = epochs;
  h.lr = 1e-2;
  h.weight_decay = 0.0;
  h.seed = seed;
  model::Camd<float> m(cfg, train::init_seed(h));
  const auto idx = train::all_indices(d);
  OverfitResult r;
  const auto log = train::train(m, d, idx, idx, h, [&](const train::EpochRecord& e) {
    if (!r.first_perfect_epoch && e.val_acc == 1.0) r.first_perfect_epoch = e.epoch;
  });
  r.final_loss = log.epochs.empty() ? 0.0 : log.epochs.back().train_loss;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace camd::testing
