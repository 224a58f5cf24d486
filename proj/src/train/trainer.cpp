#include "camd/train/trainer.h"

#include <chrono>
#include <cmath>
#include <limits>

#include "camd/common/error.h"
#include "camd/common/rng.h"
#include "camd/diffcore/ops.h"
#include "camd/diffcore/tape.h"
#include "camd/train/evaluate.h"
#include "json.hpp"

namespace camd::train {

using model::Tensor;

void TrainHyper::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) throw ConfigError("weight decay must be non-negative");
  if (batch == 0) throw ConfigError("batch size must be positive");
  if (eval_batch == 0) throw ConfigError("eval batch size must be positive");
}

std::uint64_t init_seed(const TrainHyper& h) { return derive_seed(h.seed, 0); }

double train_step(model::Camd<float>& m, diff::AdamWState<float>& state, const Tensor<float>& x,
                  std::span<const int> labels) {
  std::vector<Tensor<float>> params = m.parameter_tensors();
  double loss_value = 0.0;
  {
    diff::Tape tape;
    diff::TapeScope scope(tape);
    Tensor<float> loss;
    try {
      loss = diff::cross_entropy(m.forward(x), labels);
      loss_value = loss.item();
    } catch (const NumericInputError&) {
      loss_value = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(loss_value)) {
      m.zero_grad();
      throw DivergenceError("non-finite loss after " + std::to_string(state.step) + " steps");
    }
    diff::backward(loss);
  }
  diff::adamw_step(std::span<Tensor<float>>(params), state);
  m.zero_grad();
  return loss_value;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string snapshot(const model::Camd<float>& m, const TrainHyper& h) {
  nlohmann::ordered_json j;
  j["model"] = nlohmann::ordered_json::parse(m.config().to_json());
  j["train"] = {{"lr", h.lr},         {"weight_decay", h.weight_decay}, {"batch", h.batch},
                {"epochs", h.epochs}, {"seed", h.seed},                 {"eval_batch", h.eval_batch}};
  return j.dump();
}

}  // namespace

TrainLog train(model::Camd<float>& m, const sig::Dataset& d, std::span<const std::size_t> train_idx,
               std::span<const std::size_t> val_idx, const TrainHyper& hyper, const EpochCallback& on_epoch) {
  hyper.validate();
  if (train_idx.empty() && hyper.epochs > 0) throw ContractError("train: no training frames");
  const auto t_start = Clock::now();

  TrainLog log;
  log.seed = hyper.seed;
  log.config = snapshot(m, hyper);

  std::vector<Tensor<float>> params = m.parameter_tensors();
  auto state = diff::AdamWState<float>::for_params(params, {.lr = hyper.lr, .weight_decay = hyper.weight_decay});
  std::vector<std::vector<float>> best;

  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const auto t_epoch = Clock::now();
    Rng rng(derive_seed(hyper.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += hyper.batch) {
      const std::size_t hi = std::min(order.size(), lo + hyper.batch);
      const auto idx = std::span<const std::size_t>(order).subspan(lo, hi - lo);
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = d.frames.at(idx[i]).label;
      try {
        loss_sum += train_step(m, state, make_batch(d, idx), labels) * static_cast<double>(idx.size());
      } catch (const DivergenceError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (val_idx.empty()) {
      rec.val_loss = rec.val_acc = std::numeric_limits<double>::quiet_NaN();
    } else {
      const Scores s = score(m, d, val_idx, hyper.eval_batch);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < val_idx.size(); ++i) correct += s.predictions[i] == d.frames[val_idx[i]].label;
      rec.val_loss = s.mean_loss;
      rec.val_acc = static_cast<double>(correct) / static_cast<double>(val_idx.size());
      if (!log.best_epoch || rec.val_acc > log.best_val_acc) {
        log.best_epoch = epoch;
        log.best_val_acc = rec.val_acc;
        best.clear();
        for (const auto& p : params) best.emplace_back(p.data().begin(), p.data().end());
      }
    }
    rec.seconds = since(t_epoch);
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  if (!best.empty()) {
    for (std::size_t k = 0; k < params.size(); ++k) std::copy(best[k].begin(), best[k].end(), params[k].data().begin());
  } else if (!log.epochs.empty()) {
    log.best_epoch = log.epochs.back().epoch;
  }
  log.wall_seconds = since(t_start);
  return log;
}

}  // namespace camd::train
