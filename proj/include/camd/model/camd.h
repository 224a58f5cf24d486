#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camd/model/config.h"
#include "camd/model/layers.h"

namespace camd::model {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> value;
};

// Embedding, transformer blocks and LSTM layers at one width. The main
// extractor and the compensation predictor are both built from this.
template <typename T>
struct Extractor {
  EmbedParams<T> embed;
  std::vector<BlockParams<T>> blocks;
  std::vector<diff::LstmParams<T>> lstm;
  std::size_t heads = 1;
};

// The CAMD network. Inputs are batches of received frames [B x Nr x L x 2];
// forward() returns logits [B x K].
//
// Parameters live in one canonical, named list: the compensation stack
// ("cc." prefix, absent for no_cc) followed by the main extractor and the
// classifier. Checkpoints and the parameter count walk that list.
template <typename T>
class Camd {
 public:
  Camd(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  Tensor<T> forward(const Tensor<T>& x) const;

  // Predicted compensation [B x Nr x Nt x L x 2], constant along L.
  Tensor<T> cc_predict(const Tensor<T>& x) const;

  std::vector<NamedParam<T>>& parameters() { return params_; }
  const std::vector<NamedParam<T>>& parameters() const { return params_; }
  std::vector<Tensor<T>> parameter_tensors() const;
  Tensor<T>* find(const std::string& name);

  std::size_t parameter_count() const;
  void zero_grad() const;

  // Direct access for layer-level tests.
  const Extractor<T>& main_extractor() const { return main_; }
  const Extractor<T>& cc_extractor() const { return cc_; }
  Tensor<T>& classifier_weight() { return cls_w_; }
  Tensor<T>& classifier_bias() { return cls_b_; }
  Tensor<T>& cc_head_weight() { return head_w_; }
  Tensor<T>& cc_head_bias() { return head_b_; }

 private:
  Tensor<T> extract(const Tensor<T>& x) const;

  ModelConfig config_;
  Extractor<T> cc_;
  Extractor<T> main_;
  Tensor<T> head_w_, head_b_;  // [C_cc x 2 Nt], [2 Nt]
  Tensor<T> cls_w_, cls_b_;    // [C x K], [K]
  std::vector<NamedParam<T>> params_;
};

// Copies parameter values between precisions (same config, same names).
template <typename To, typename From>
void copy_parameters(const Camd<From>& from, Camd<To>& to);

// Closed-form counts for one frame's forward pass.
std::size_t count_params(const ModelConfig& config);
std::size_t estimate_flops(const ModelConfig& config);

}  // namespace camd::model
