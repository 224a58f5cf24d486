#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camd/diffcore/adamw.h"
#include "camd/model/camd.h"
#include "camd/sigsynth/dataset.h"

namespace camd::train {

struct TrainHyper {
  double lr = 2e-3;
  double weight_decay = 1e-3;
  std::size_t batch = 512;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  std::size_t eval_batch = 256;

  void validate() const;
};

// Seed for Camd's parameter initialization; epochs shuffle with
// derive_seed(seed, e) for e >= 1.
std::uint64_t init_seed(const TrainHyper& h);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double val_acc = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config;  // JSON: model config and hyperparameters
  std::optional<std::size_t> best_epoch;
  double best_val_acc = 0.0;
};

// One optimizer step on a batch: forward, cross-entropy, backward, AdamW,
// zero the gradients. Returns the loss before the step; DivergenceError if it
// is not finite (the parameters are left untouched then).
double train_step(model::Camd<float>& m, diff::AdamWState<float>& state, const model::Tensor<float>& x,
                  std::span<const int> labels);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch AdamW at a constant learning rate. Epoch e visits the training
// frames in an order shuffled by derive_seed(seed, e); the last partial batch
// is kept. After every epoch the validation set is scored and the parameters
// with the best validation accuracy (earliest on ties) are restored at the
// end. Without a validation set the final parameters are kept.
TrainLog train(model::Camd<float>& m, const sig::Dataset& d, std::span<const std::size_t> train_idx,
               std::span<const std::size_t> val_idx, const TrainHyper& hyper, const EpochCallback& on_epoch = {});

}  // namespace camd::train
