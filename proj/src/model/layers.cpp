#include "camd/model/layers.h"

#include <string>

#include "camd/common/error.h"

namespace camd::model {

using namespace camd::diff;

template <typename T>
Tensor<T> embed(const Tensor<T>& x, const EmbedParams<T>& p, std::size_t kernel) {
  if (x.rank() != 4 || x.dim(3) != 2) throw DimensionError("embed: expected [G x A x L x 2], got " + shape_str(x.shape()));
  const std::size_t g = x.dim(0), a = x.dim(1), len = x.dim(2);
  const std::size_t shrink = std::size_t{1} << p.conv_w.size();
  if (len < shrink * kernel)
    throw DegenerateLengthError("embed: L=" + std::to_string(len) + " is shorter than 2^K_c * kernel = " +
                                std::to_string(shrink * kernel));
  Tensor<T> h = linear(x.reshape({g * a, len, 2}), p.proj_w, p.proj_b);
  for (std::size_t k = 0; k < p.conv_w.size(); ++k) h = relu(conv1d(h, p.conv_w[k], p.conv_b[k], 2, kernel / 2));
  return h.reshape({g, a, h.dim(1), h.dim(2)});
}

template <typename T>
Tensor<T> reglu(const Tensor<T>& x, const Tensor<T>& w1, const Tensor<T>& w2, const Tensor<T>& w3) {
  return linear(mul(relu(linear(x, w1)), linear(x, w2)), w3);
}

template <typename T>
Tensor<T> antenna_block(const Tensor<T>& x, const BlockParams<T>& p, std::size_t heads) {
  const Tensor<T> y = layer_norm(x, p.ln1_g, p.ln1_b);
  const Tensor<T> attn = multi_head_attention(linear(y, p.wq), linear(y, p.wk), linear(y, p.wv), heads);
  const Tensor<T> mid = add(x, linear(attn, p.wo));
  return add(mid, reglu(layer_norm(mid, p.ln2_g, p.ln2_b), p.w1, p.w2, p.w3));
}

template <typename T>
Tensor<T> lstm_final_state(const Tensor<T>& x, const std::vector<LstmParams<T>>& layers) {
  if (x.rank() != 4) throw DimensionError("lstm: expected [G x A x T x C], got " + shape_str(x.shape()));
  if (layers.empty()) throw ContractError("lstm: no layers");
  const std::size_t g = x.dim(0), a = x.dim(1), steps = x.dim(2);
  const std::size_t n = g * a;
  Tensor<T> seq = x.reshape({n, steps, x.dim(3)});
  Tensor<T> h;
  for (std::size_t layer = 0; layer < layers.size(); ++layer) {
    const auto& p = layers[layer];
    const std::size_t width = p.w_hidden.dim(0);
    // Input contributions for every step in one product.
    const Tensor<T> pre = linear(seq, p.w_input, p.bias);  // [n x T x 4C]
    h = Tensor<T>::zeros({n, width});
    Tensor<T> c = Tensor<T>::zeros({n, width});
    const bool last = layer + 1 == layers.size();
    std::vector<Tensor<T>> outputs;
    if (!last) outputs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      Tensor<T> gates = select(pre, 1, t);
      if (t > 0) gates = add(gates, matmul(h, p.w_hidden));  // h = 0 at t = 0
      auto next = lstm_pointwise(gates, c);
      h = next.h;
      c = next.c;
      if (!last) outputs.push_back(h);
    }
    if (!last) seq = stack(std::span<const Tensor<T>>(outputs), 1);
  }
  return h.reshape({g, a, h.dim(1)});
}

template <typename T>
Tensor<T> temporal_stage(const Tensor<T>& x, const std::vector<LstmParams<T>>& layers, const Tensor<T>& cls_w,
                         const Tensor<T>& cls_b) {
  return linear(mean_axis(lstm_final_state(x, layers), 1), cls_w, cls_b);
}

template <typename T>
Tensor<T> cc_apply(const Tensor<T>& h, const Tensor<T>& r) {
  if (h.rank() != 5 || r.rank() != 4 || h.dim(4) != 2 || r.dim(3) != 2 || h.dim(0) != r.dim(0) ||
      h.dim(1) != r.dim(1) || h.dim(3) != r.dim(2)) {
    throw DimensionError("cc_apply: compensation " + shape_str(h.shape()) + " does not fit signal " +
                         shape_str(r.shape()));
  }
  const std::size_t G = r.dim(0), nr = r.dim(1), nt = h.dim(2), L = r.dim(2);
  const bool track = active_tape() != nullptr && (h.requires_grad() || r.requires_grad());
  Tensor<T> out({G, nt, L, 2}, track);
  const T* ph = h.ptr();
  const T* pr = r.ptr();
  T* po = out.ptr();
  auto h_at = [=](std::size_t g, std::size_t j, std::size_t i, std::size_t t) {
    return (((g * nr + j) * nt + i) * L + t) * 2;
  };
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t i = 0; i < nt; ++i) {
      T* o = po + (g * nt + i) * L * 2;
      for (std::size_t j = 0; j < nr; ++j) {
        const T* rj = pr + (g * nr + j) * L * 2;
        for (std::size_t t = 0; t < L; ++t) {
          const T hi = ph[h_at(g, j, i, t)], hq = ph[h_at(g, j, i, t) + 1];
          const T ri = rj[2 * t], rq = rj[2 * t + 1];
          o[2 * t] += hi * ri - hq * rq;
          o[2 * t + 1] += hq * ri + hi * rq;
        }
      }
    }
  }
  if (track) {
    active_tape()->record([h, r, out, G, nr, nt, L, h_at]() {
      const T* go = out.grad_ptr();
      T* gh = h.requires_grad() ? h.grad_ptr() : nullptr;
      T* gr = r.requires_grad() ? r.grad_ptr() : nullptr;
      const T* ph = h.ptr();
      const T* pr = r.ptr();
      for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t i = 0; i < nt; ++i) {
          const T* o = go + (g * nt + i) * L * 2;
          for (std::size_t j = 0; j < nr; ++j) {
            const std::size_t rbase = (g * nr + j) * L * 2;
            for (std::size_t t = 0; t < L; ++t) {
              const std::size_t hk = h_at(g, j, i, t);
              const T oi = o[2 * t], oq = o[2 * t + 1];
              const T ri = pr[rbase + 2 * t], rq = pr[rbase + 2 * t + 1];
              const T hi = ph[hk], hq = ph[hk + 1];
              if (gh) {
                gh[hk] += oi * ri + oq * rq;
                gh[hk + 1] += -oi * rq + oq * ri;
              }
              if (gr) {
                gr[rbase + 2 * t] += oi * hi + oq * hq;
                gr[rbase + 2 * t + 1] += -oi * hq + oq * hi;
              }
            }
          }
        }
      }
    });
  }
  return out;
}

#define CAMD_INSTANTIATE_LAYERS(T)                                                                              \
  template Tensor<T> embed(const Tensor<T>&, const EmbedParams<T>&, std::size_t);                               \
  template Tensor<T> reglu(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> antenna_block(const Tensor<T>&, const BlockParams<T>&, std::size_t);                       \
  template Tensor<T> lstm_final_state(const Tensor<T>&, const std::vector<LstmParams<T>>&);                     \
  template Tensor<T> temporal_stage(const Tensor<T>&, const std::vector<LstmParams<T>>&, const Tensor<T>&,      \
                                    const Tensor<T>&);                                                          \
  template Tensor<T> cc_apply(const Tensor<T>&, const Tensor<T>&);

CAMD_INSTANTIATE_LAYERS(float)
CAMD_INSTANTIATE_LAYERS(double)

}  // namespace camd::model
