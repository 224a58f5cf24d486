#pragma once

#include <cstddef>
#include <vector>

#include "camd/diffcore/ops.h"

namespace camd::model {

using diff::Tensor;

// Point-wise IQ projection followed by strided conv + ReLU stages.
template <typename T>
struct EmbedParams {
  Tensor<T> proj_w;  // [2 x C]
  Tensor<T> proj_b;  // [C]
  std::vector<Tensor<T>> conv_w;  // [k x C x C]
  std::vector<Tensor<T>> conv_b;  // [C]
};

// Pre-norm transformer block: attention over antennas, then ReGLU FFN.
template <typename T>
struct BlockParams {
  Tensor<T> ln1_g, ln1_b;
  Tensor<T> wq, wk, wv, wo;  // [C x C], no bias
  Tensor<T> ln2_g, ln2_b;
  Tensor<T> w1, w2;  // [C x ffn]
  Tensor<T> w3;      // [ffn x C]
};

// x [G x A x L x 2] -> [G x A x L/2^K_c x C].
template <typename T>
Tensor<T> embed(const Tensor<T>& x, const EmbedParams<T>& p, std::size_t kernel);

// (relu(x W1) * (x W2)) W3 over the last axis.
template <typename T>
Tensor<T> reglu(const Tensor<T>& x, const Tensor<T>& w1, const Tensor<T>& w2, const Tensor<T>& w3);

// X [G x A x T x C]; every time slot attends across its A antenna tokens.
template <typename T>
Tensor<T> antenna_block(const Tensor<T>& x, const BlockParams<T>& p, std::size_t heads);

// Runs the stacked LSTM along T for every (g, a) stream with shared weights
// and returns each stream's final hidden state, [G x A x C].
template <typename T>
Tensor<T> lstm_final_state(const Tensor<T>& x, const std::vector<diff::LstmParams<T>>& layers);

// Final LSTM state, mean over antennas, linear classifier: [G x K].
template <typename T>
Tensor<T> temporal_stage(const Tensor<T>& x, const std::vector<diff::LstmParams<T>>& layers, const Tensor<T>& cls_w,
                         const Tensor<T>& cls_b);

// Complex compensation r_hat_i = sum_j H(j, i) r_j, per time slot.
// h [G x Nr x Nt x L x 2], r [G x Nr x L x 2] -> [G x Nt x L x 2].
template <typename T>
Tensor<T> cc_apply(const Tensor<T>& h, const Tensor<T>& r);

}  // namespace camd::model
