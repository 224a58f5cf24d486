#include "camd/train/evaluate.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "camd/common/error.h"
#include "camd/common/parallel.h"
#include "camd/diffcore/ops.h"

namespace camd::train {

using model::Tensor;

Tensor<float> make_batch(const sig::Dataset& d, std::span<const std::size_t> indices) {
  const std::size_t per = d.frame_floats();
  Tensor<float> x({indices.size(), d.nr, d.length, 2});
  float* dst = x.ptr();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& iq = d.frames.at(indices[b]).iq;
    if (iq.size() != per) throw DimensionError("frame " + std::to_string(indices[b]) + " has the wrong size");
    // Unit mean power per frame: fading makes received power vary by an order
    // of magnitude between frames, which the network should not have to learn.
    double power = 0.0;
    for (float v : iq) power += static_cast<double>(v) * v;
    power /= static_cast<double>(per / 2);
    const double gain = power > 0.0 ? 1.0 / std::sqrt(power) : 1.0;
    float* out = dst + b * per;
    for (std::size_t k = 0; k < per; ++k) out[k] = static_cast<float>(iq[k] * gain);
  }
  return x;
}

Scores score(const model::Camd<float>& m, const sig::Dataset& d, std::span<const std::size_t> indices,
             std::size_t batch) {
  if (batch == 0) throw ConfigError("batch size must be positive");
  const std::size_t n = indices.size();
  const std::size_t n_batches = (n + batch - 1) / batch;
  Scores out;
  out.predictions.assign(n, 0);
  std::vector<double> batch_loss(n_batches, 0.0);

  parallel_for(n_batches, [&](std::size_t first, std::size_t last) {
    diff::NoGradScope no_grad;
    for (std::size_t k = first; k < last; ++k) {
      const std::size_t lo = k * batch;
      const std::size_t hi = std::min(n, lo + batch);
      const auto idx = indices.subspan(lo, hi - lo);
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = d.frames[idx[i]].label;

      const Tensor<float> logits = m.forward(make_batch(d, idx));
      batch_loss[k] = static_cast<double>(diff::cross_entropy(logits, std::span<const int>(labels)).item()) *
                      static_cast<double>(idx.size());
      const std::size_t classes = logits.dim(1);
      const float* z = logits.ptr();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const float* row = z + i * classes;
        out.predictions[lo + i] = static_cast<int>(std::max_element(row, row + classes) - row);
      }
    }
  });

  double total = 0.0;
  for (double l : batch_loss) total += l;
  out.mean_loss = n ? total / static_cast<double>(n) : 0.0;
  return out;
}

EvalReport evaluate_predictions(const sig::Dataset& d, std::span<const std::size_t> indices,
                                std::span<const int> predictions, float low_snr_db) {
  if (indices.size() != predictions.size()) throw DimensionError("evaluate: one prediction per frame is required");
  if (indices.empty()) throw ContractError("evaluate: no frames");
  const std::size_t k = d.num_classes();

  std::map<float, SnrStats> by_snr;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& f = d.frames.at(indices[i]);
    const int p = predictions[i];
    if (f.label >= k) throw LabelError("frame label " + std::to_string(f.label) + " out of range");
    if (p < 0 || static_cast<std::size_t>(p) >= k) throw LabelError("prediction " + std::to_string(p) + " out of range");
    auto& s = by_snr[f.snr_db];
    if (s.confusion.empty()) {
      s.snr_db = f.snr_db;
      s.confusion.assign(k, std::vector<std::size_t>(k, 0));
    }
    ++s.frames;
    ++s.confusion[f.label][p];
    if (f.label == p) ++s.correct;
  }

  EvalReport r;
  r.class_names = d.class_names;
  r.low_snr_db = low_snr_db;
  std::size_t correct = 0;
  double sum = 0.0;
  for (auto& [snr, s] : by_snr) {
    s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.frames);
    r.frames += s.frames;
    correct += s.correct;
    sum += s.accuracy;
    r.max = std::max(r.max, s.accuracy);
    if (std::abs(snr - low_snr_db) < 1e-4f) r.low = s.accuracy;
    r.per_snr.push_back(std::move(s));
  }
  r.overall = static_cast<double>(correct) / static_cast<double>(r.frames);
  r.avg = sum / static_cast<double>(r.per_snr.size());
  return r;
}

EvalReport evaluate(const model::Camd<float>& m, const sig::Dataset& d, std::span<const std::size_t> indices,
                    float low_snr_db, std::size_t batch) {
  const Scores s = score(m, d, indices, batch);
  return evaluate_predictions(d, indices, s.predictions, low_snr_db);
}

std::vector<std::size_t> all_indices(const sig::Dataset& d) {
  std::vector<std::size_t> idx(d.frames.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

}  // namespace camd::train
