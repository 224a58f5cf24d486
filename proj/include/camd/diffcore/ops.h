#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "camd/diffcore/tape.h"
#include "camd/diffcore/tensor.h"

namespace camd::diff {

// Every op records its adjoint on the active tape when at least one input
// requires grad. Shapes must match exactly; there is no broadcasting.

// ---- elementwise ---------------------------------------------------------

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);

enum class Activation { relu, sigmoid, tanh };

template <typename T> Tensor<T> activation(const Tensor<T>& x, Activation kind);
template <typename T> Tensor<T> relu(const Tensor<T>& x) { return activation(x, Activation::relu); }
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x) { return activation(x, Activation::sigmoid); }
template <typename T> Tensor<T> tanh(const Tensor<T>& x) { return activation(x, Activation::tanh); }

// While in scope, tracks the smallest |x| passed to relu on this thread and
// the on/off pattern. Finite-difference checks use it to spot kink crossings.
class ReluMarginProbe {
 public:
  ReluMarginProbe();
  ~ReluMarginProbe();
  ReluMarginProbe(const ReluMarginProbe&) = delete;
  ReluMarginProbe& operator=(const ReluMarginProbe&) = delete;

  void observe(double x) {
    const double m = x < 0 ? -x : x;
    margin_ = m < margin_ ? m : margin_;
    pattern_ = (pattern_ ^ (x > 0 ? 1u : 0u)) * 0x100000001b3ull;
  }
  double margin() const { return margin_; }
  // Hash of the on/off pattern of every relu seen so far.
  std::uint64_t pattern() const { return pattern_; }

  static ReluMarginProbe* current();

 private:
  double margin_;
  std::uint64_t pattern_ = 0xcbf29ce484222325ull;
  ReluMarginProbe* previous_;
};

// ---- reductions and layout -----------------------------------------------

// Scalar sum / mean of all entries, shape [1].
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

// Mean over one axis; the axis is removed.
template <typename T> Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis);

// View with a new shape (no copy, no tape entry).
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape) { return x.reshape(std::move(shape)); }

// out.shape[i] = x.shape[perm[i]].
template <typename T> Tensor<T> permute(const Tensor<T>& x, std::span<const std::size_t> perm);

// x[..., index, ...] along axis; the axis is removed.
template <typename T> Tensor<T> select(const Tensor<T>& x, std::size_t axis, std::size_t index);

// Inverse of select: equal-shape inputs stacked along a new axis.
template <typename T> Tensor<T> stack(std::span<const Tensor<T>> xs, std::size_t axis);

// Inserts a new axis of size count by repetition; the adjoint sums it back.
template <typename T> Tensor<T> repeat_axis(const Tensor<T>& x, std::size_t axis, std::size_t count);

// ---- linear algebra ------------------------------------------------------

// [m x k] . [k x n] -> [m x n].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x[..., in] . w[in x out] + bias[out] -> [..., out]. bias may be undefined.
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias = {});

// x[N x L x Cin], w[k x Cin x Cout], b[Cout] -> [N x L' x Cout] with
// L' = floor((L + 2 pad - k) / stride) + 1, zero padding.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride, std::size_t pad);

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride, std::size_t pad);

// ---- normalization, probabilities, loss -----------------------------------

// Softmax over the last axis with row-max subtraction.
template <typename T> Tensor<T> softmax(const Tensor<T>& z);

// Mean over the batch of -log softmax(logits)[label]; logits [B x K].
template <typename T> Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

inline constexpr double kLayerNormEpsilon = 1e-5;

// Standardizes the last axis, then applies gamma * x + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta);

// ---- recurrent cell -------------------------------------------------------

// Gate layout in the 4C-wide projections: input, forget, cell, output.
template <typename T>
struct LstmParams {
  Tensor<T> w_input;   // [Cin x 4C]
  Tensor<T> w_hidden;  // [C x 4C]
  Tensor<T> bias;      // [4C]
};

template <typename T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;
};

// One LSTM step: x[B x Cin], h, c [B x C].
template <typename T>
LstmState<T> lstm_cell(const Tensor<T>& x, const Tensor<T>& h, const Tensor<T>& c, const LstmParams<T>& params);

// Gate nonlinearities and state update given pre-activations gates[B x 4C].
template <typename T> LstmState<T> lstm_pointwise(const Tensor<T>& gates, const Tensor<T>& c);

// ---- attention -------------------------------------------------------------

// Multi-head self-attention over axis 1 of [G x A x T x C] tensors: for every
// (g, t) the A entries are tokens attending to each other. Per head,
// softmax(Q K^T / sqrt(C / heads)) V; head outputs are concatenated along C.
// Projections are the caller's job.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads);

// Attention probabilities [G x T x heads x A x A] for inspection; never recorded.
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads);

}  // namespace camd::diff
