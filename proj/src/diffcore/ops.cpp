#include "camd/diffcore/ops.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "gemm.h"

namespace camd::diff {

namespace {

template <typename T, typename... Ts>
bool tracking(const Tensor<T>& first, const Ts&... rest) {
  if (active_tape() == nullptr) return false;
  return first.requires_grad() || (rest.requires_grad() || ...);
}

void record(Tape::Adjoint adjoint) { active_tape()->record(std::move(adjoint)); }

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename T>
void require_finite(const Tensor<T>& x, const char* op) {
  for (T v : x.data()) {
    if (!std::isfinite(v)) throw NumericInputError(std::string(op) + ": non-finite input");
  }
}

// Splits a shape around one axis into (outer, extent, inner) element counts.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

// ---- elementwise ---------------------------------------------------------

namespace {
thread_local ReluMarginProbe* relu_probe = nullptr;
}

ReluMarginProbe::ReluMarginProbe() : margin_(std::numeric_limits<double>::infinity()), previous_(relu_probe) {
  relu_probe = this;
}

ReluMarginProbe::~ReluMarginProbe() { relu_probe = previous_; }

ReluMarginProbe* ReluMarginProbe::current() { return relu_probe; }

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  const bool track = tracking(a, b);
  Tensor<T> out(a.shape(), track);
  const std::size_t n = out.numel();
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* po = out.ptr();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  if (track) {
    record([a, b, out]() mutable {
      const T* g = out.grad_ptr();
      const std::size_t n = out.numel();
      if (a.requires_grad()) {
        T* ga = a.grad_ptr();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        T* gb = b.grad_ptr();
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  const bool track = tracking(a, b);
  Tensor<T> out(a.shape(), track);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] - b.ptr()[i];
  if (track) {
    record([a, b, out]() mutable {
      const T* g = out.grad_ptr();
      const std::size_t n = out.numel();
      if (a.requires_grad()) {
        for (std::size_t i = 0; i < n; ++i) a.grad_ptr()[i] += g[i];
      }
      if (b.requires_grad()) {
        for (std::size_t i = 0; i < n; ++i) b.grad_ptr()[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  const bool track = tracking(a, b);
  Tensor<T> out(a.shape(), track);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] * b.ptr()[i];
  if (track) {
    record([a, b, out]() mutable {
      const T* g = out.grad_ptr();
      const std::size_t n = out.numel();
      if (a.requires_grad()) {
        for (std::size_t i = 0; i < n; ++i) a.grad_ptr()[i] += g[i] * b.ptr()[i];
      }
      if (b.requires_grad()) {
        for (std::size_t i = 0; i < n; ++i) b.grad_ptr()[i] += g[i] * a.ptr()[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  const bool track = tracking(a);
  Tensor<T> out(a.shape(), track);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] * factor;
  if (track) {
    record([a, out, factor]() mutable {
      const std::size_t n = out.numel();
      for (std::size_t i = 0; i < n; ++i) a.grad_ptr()[i] += out.grad_ptr()[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  const bool track = tracking(x);
  Tensor<T> out(x.shape(), track);
  const std::size_t n = out.numel();
  const T* px = x.ptr();
  T* py = out.ptr();
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) py[i] = px[i] > T(0) ? px[i] : T(0);
      if (auto* probe = ReluMarginProbe::current())
        for (std::size_t i = 0; i < n; ++i) probe->observe(static_cast<double>(px[i]));
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < n; ++i) py[i] = T(1) / (T(1) + std::exp(-px[i]));
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < n; ++i) py[i] = std::tanh(px[i]);
      break;
  }
  if (track) {
    record([x, out, kind]() mutable {
      const std::size_t n = out.numel();
      const T* g = out.grad_ptr();
      const T* y = out.ptr();
      const T* xv = x.ptr();
      T* gx = x.grad_ptr();
      switch (kind) {
        case Activation::relu:
          for (std::size_t i = 0; i < n; ++i) gx[i] += xv[i] > T(0) ? g[i] : T(0);
          break;
        case Activation::sigmoid:
          for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
          break;
        case Activation::tanh:
          for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * (T(1) - y[i] * y[i]);
          break;
      }
    });
  }
  return out;
}

// ---- reductions and layout -----------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const bool track = tracking(x);
  double total = 0.0;
  for (T v : x.data()) total += v;
  Tensor<T> out(Shape{1}, track);
  out.ptr()[0] = static_cast<T>(total);
  if (track) {
    record([x, out]() mutable {
      const T g = out.grad_ptr()[0];
      for (T& gx : x.grad()) gx += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) throw DimensionError("mean_axis: axis out of range for " + shape_str(x.shape()));
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape.push_back(1);
  const bool track = tracking(x);
  Tensor<T> out(out_shape, track);
  const T inv = T(1) / static_cast<T>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    T* dst = out.ptr() + o * s.inner;
    for (std::size_t e = 0; e < s.extent; ++e) {
      const T* src = x.ptr() + (o * s.extent + e) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
    for (std::size_t i = 0; i < s.inner; ++i) dst[i] *= inv;
  }
  if (track) {
    record([x, out, s, inv]() mutable {
      for (std::size_t o = 0; o < s.outer; ++o) {
        const T* g = out.grad_ptr() + o * s.inner;
        for (std::size_t e = 0; e < s.extent; ++e) {
          T* gx = x.grad_ptr() + (o * s.extent + e) * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) gx[i] += g[i] * inv;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::span<const std::size_t> perm) {
  const std::size_t rank = x.rank();
  if (perm.size() != rank) throw DimensionError("permute: permutation rank does not match " + shape_str(x.shape()));
  std::vector<bool> seen(rank, false);
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (perm[i] >= rank || seen[perm[i]]) throw DimensionError("permute: invalid permutation");
    seen[perm[i]] = true;
    out_shape[i] = x.dim(perm[i]);
  }
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * x.dim(i);

  // gather[o] = source offset of output element o.
  const std::size_t n = x.numel();
  auto gather = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> index(rank, 0);
  for (std::size_t o = 0; o < n; ++o) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += index[i] * in_strides[perm[i]];
    (*gather)[o] = src;
    for (std::size_t i = rank; i-- > 0;) {
      if (++index[i] < out_shape[i]) break;
      index[i] = 0;
    }
  }
  const bool track = tracking(x);
  Tensor<T> out(out_shape, track);
  for (std::size_t o = 0; o < n; ++o) out.ptr()[o] = x.ptr()[(*gather)[o]];
  if (track) {
    record([x, out, gather]() mutable {
      const std::size_t n = out.numel();
      for (std::size_t o = 0; o < n; ++o) x.grad_ptr()[(*gather)[o]] += out.grad_ptr()[o];
    });
  }
  return out;
}

template <typename T>
Tensor<T> select(const Tensor<T>& x, std::size_t axis, std::size_t index) {
  if (axis >= x.rank() || index >= x.dim(axis)) {
    throw DimensionError("select: index " + std::to_string(index) + " on axis " + std::to_string(axis) +
                         " out of range for " + shape_str(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape.push_back(1);
  const bool track = tracking(x);
  Tensor<T> out(out_shape, track);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const T* src = x.ptr() + (o * s.extent + index) * s.inner;
    std::copy(src, src + s.inner, out.ptr() + o * s.inner);
  }
  if (track) {
    record([x, out, s, index]() mutable {
      for (std::size_t o = 0; o < s.outer; ++o) {
        const T* g = out.grad_ptr() + o * s.inner;
        T* gx = x.grad_ptr() + (o * s.extent + index) * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) gx[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("stack: no inputs");
  const Shape& item_shape = xs.front().shape();
  if (axis > item_shape.size()) throw DimensionError("stack: axis out of range");
  bool any_grad = false;
  for (const auto& x : xs) {
    if (x.shape() != item_shape) {
      throw DimensionError("stack: shape mismatch " + shape_str(item_shape) + " vs " + shape_str(x.shape()));
    }
    any_grad = any_grad || x.requires_grad();
  }
  Shape out_shape = item_shape;
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), xs.size());
  const AxisSplit s = split_at(out_shape, axis);
  const bool track = active_tape() != nullptr && any_grad;
  Tensor<T> out(out_shape, track);
  for (std::size_t e = 0; e < s.extent; ++e) {
    const T* src = xs[e].ptr();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy(src + o * s.inner, src + (o + 1) * s.inner, out.ptr() + (o * s.extent + e) * s.inner);
    }
  }
  if (track) {
    std::vector<Tensor<T>> inputs(xs.begin(), xs.end());
    record([inputs, out, s]() mutable {
      for (std::size_t e = 0; e < s.extent; ++e) {
        if (!inputs[e].requires_grad()) continue;
        T* gx = inputs[e].grad_ptr();
        for (std::size_t o = 0; o < s.outer; ++o) {
          const T* g = out.grad_ptr() + (o * s.extent + e) * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) gx[o * s.inner + i] += g[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> repeat_axis(const Tensor<T>& x, std::size_t axis, std::size_t count) {
  if (axis > x.rank()) throw DimensionError("repeat_axis: axis out of range for " + shape_str(x.shape()));
  if (count == 0) throw DimensionError("repeat_axis: count must be positive");
  Shape out_shape = x.shape();
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), count);
  const AxisSplit s = split_at(out_shape, axis);
  const bool track = tracking(x);
  Tensor<T> out(out_shape, track);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const T* src = x.ptr() + o * s.inner;
    for (std::size_t e = 0; e < count; ++e) {
      std::copy(src, src + s.inner, out.ptr() + (o * count + e) * s.inner);
    }
  }
  if (track) {
    record([x, out, s]() mutable {
      for (std::size_t o = 0; o < s.outer; ++o) {
        T* gx = x.grad_ptr() + o * s.inner;
        for (std::size_t e = 0; e < s.extent; ++e) {
          const T* g = out.grad_ptr() + (o * s.extent + e) * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) gx[i] += g[i];
        }
      }
    });
  }
  return out;
}

// ---- linear algebra ------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const bool track = tracking(a, b);
  Tensor<T> out(Shape{m, n}, track);
  detail::gemm<T>(false, false, m, n, k, T(1), a.ptr(), b.ptr(), T(0), out.ptr());
  if (track) {
    record([a, b, out, m, k, n]() mutable {
      if (a.requires_grad()) detail::gemm<T>(false, true, m, k, n, T(1), out.grad_ptr(), b.ptr(), T(1), a.grad_ptr());
      if (b.requires_grad()) detail::gemm<T>(true, false, k, n, m, T(1), a.ptr(), out.grad_ptr(), T(1), b.grad_ptr());
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  if (w.rank() != 2 || x.rank() == 0 || x.shape().back() != w.dim(0)) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " + shape_str(w.shape()));
  }
  const std::size_t in = w.dim(0), out_features = w.dim(1);
  if (bias.defined() && bias.numel() != out_features) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " + shape_str(w.shape()));
  }
  const std::size_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_features;
  const bool track = tracking(x, w, bias);
  Tensor<T> out(out_shape, track);
  detail::gemm<T>(false, false, rows, out_features, in, T(1), x.ptr(), w.ptr(), T(0), out.ptr());
  if (bias.defined()) {
    const T* pb = bias.ptr();
    for (std::size_t r = 0; r < rows; ++r) {
      T* row = out.ptr() + r * out_features;
      for (std::size_t j = 0; j < out_features; ++j) row[j] += pb[j];
    }
  }
  if (track) {
    record([x, w, bias, out, rows, in, out_features]() mutable {
      const T* g = out.grad_ptr();
      if (x.requires_grad()) detail::gemm<T>(false, true, rows, in, out_features, T(1), g, w.ptr(), T(1), x.grad_ptr());
      if (w.requires_grad()) detail::gemm<T>(true, false, in, out_features, rows, T(1), x.ptr(), g, T(1), w.grad_ptr());
      if (bias.defined() && bias.requires_grad()) {
        T* gb = bias.grad_ptr();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < out_features; ++j) gb[j] += g[r * out_features + j];
        }
      }
    });
  }
  return out;
}

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (kernel == 0 || stride == 0) throw DimensionError("conv1d: kernel and stride must be positive");
  if (length + 2 * pad < kernel) {
    throw DegenerateLengthError("conv1d: padded length " + std::to_string(length + 2 * pad) +
                                " is shorter than kernel " + std::to_string(kernel));
  }
  return (length + 2 * pad - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride, std::size_t pad) {
  if (x.rank() != 3 || w.rank() != 3 || w.dim(1) != x.dim(2)) {
    throw DimensionError("conv1d: input " + shape_str(x.shape()) + " does not match weight " + shape_str(w.shape()));
  }
  const std::size_t batch = x.dim(0), length = x.dim(1), cin = x.dim(2);
  const std::size_t kernel = w.dim(0), cout = w.dim(2);
  if (b.defined() && b.numel() != cout) {
    throw DimensionError("conv1d: bias " + shape_str(b.shape()) + " does not match weight " + shape_str(w.shape()));
  }
  const std::size_t out_len = conv1d_output_length(length, kernel, stride, pad);
  const std::size_t rows = batch * out_len;
  const std::size_t width = kernel * cin;

  // im2col: row (n, l') holds the k x Cin window feeding output l'.
  auto cols = std::make_shared<std::vector<T>>(rows * width, T(0));
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t l = 0; l < out_len; ++l) {
      T* row = cols->data() + (n * out_len + l) * width;
      for (std::size_t j = 0; j < kernel; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l * stride + j) - static_cast<std::ptrdiff_t>(pad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(length)) continue;
        const T* in = x.ptr() + (n * length + static_cast<std::size_t>(src)) * cin;
        std::copy(in, in + cin, row + j * cin);
      }
    }
  }
  const bool track = tracking(x, w, b);
  Tensor<T> out(Shape{batch, out_len, cout}, track);
  detail::gemm<T>(false, false, rows, cout, width, T(1), cols->data(), w.ptr(), T(0), out.ptr());
  if (b.defined()) {
    for (std::size_t r = 0; r < rows; ++r) {
      T* row = out.ptr() + r * cout;
      for (std::size_t c = 0; c < cout; ++c) row[c] += b.ptr()[c];
    }
  }
  if (track) {
    record([x, w, b, out, cols, batch, length, cin, kernel, cout, out_len, rows, width, stride, pad]() mutable {
      const T* g = out.grad_ptr();
      if (w.requires_grad()) detail::gemm<T>(true, false, width, cout, rows, T(1), cols->data(), g, T(1), w.grad_ptr());
      if (b.defined() && b.requires_grad()) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cout; ++c) b.grad_ptr()[c] += g[r * cout + c];
        }
      }
      if (x.requires_grad()) {
        std::vector<T> dcols(rows * width, T(0));
        detail::gemm<T>(false, true, rows, width, cout, T(1), g, w.ptr(), T(0), dcols.data());
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t l = 0; l < out_len; ++l) {
            const T* row = dcols.data() + (n * out_len + l) * width;
            for (std::size_t j = 0; j < kernel; ++j) {
              const std::ptrdiff_t src =
                  static_cast<std::ptrdiff_t>(l * stride + j) - static_cast<std::ptrdiff_t>(pad);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(length)) continue;
              T* gx = x.grad_ptr() + (n * length + static_cast<std::size_t>(src)) * cin;
              for (std::size_t c = 0; c < cin; ++c) gx[c] += row[j * cin + c];
            }
          }
        }
      }
    });
  }
  return out;
}

// ---- normalization, probabilities, loss -----------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& z) {
  if (z.rank() == 0 || z.shape().back() == 0) throw DimensionError("softmax: empty last axis");
  require_finite(z, "softmax");
  const std::size_t width = z.shape().back();
  const std::size_t rows = z.numel() / width;
  const bool track = tracking(z);
  Tensor<T> out(z.shape(), track);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* zr = z.ptr() + r * width;
    T* pr = out.ptr() + r * width;
    const T peak = *std::max_element(zr, zr + width);
    double total = 0.0;
    for (std::size_t c = 0; c < width; ++c) total += std::exp(static_cast<double>(zr[c] - peak));
    for (std::size_t c = 0; c < width; ++c) pr[c] = static_cast<T>(std::exp(static_cast<double>(zr[c] - peak)) / total);
  }
  if (track) {
    record([z, out, rows, width]() mutable {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* p = out.ptr() + r * width;
        const T* g = out.grad_ptr() + r * width;
        T* gz = z.grad_ptr() + r * width;
        double dot = 0.0;
        for (std::size_t c = 0; c < width; ++c) dot += static_cast<double>(g[c]) * p[c];
        for (std::size_t c = 0; c < width; ++c) gz[c] += p[c] * (g[c] - static_cast<T>(dot));
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  require_finite(logits, "cross_entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw LabelError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
  auto probs = std::make_shared<std::vector<T>>(batch * classes);
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const T* z = logits.ptr() + r * classes;
    const std::size_t top = static_cast<std::size_t>(std::max_element(z, z + classes) - z);
    const double peak = z[top];
    // log-sum-exp as peak + log1p(sum of the non-peak terms) keeps tiny losses exact.
    double rest = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (c != top) rest += std::exp(static_cast<double>(z[c]) - peak);
    }
    const double lse_minus_peak = std::log1p(rest);
    const auto label = static_cast<std::size_t>(labels[r]);
    total += (peak - static_cast<double>(z[label])) + lse_minus_peak;
    const double denom = 1.0 + rest;
    for (std::size_t c = 0; c < classes; ++c) {
      (*probs)[r * classes + c] = static_cast<T>(std::exp(static_cast<double>(z[c]) - peak) / denom);
    }
  }
  const bool track = tracking(logits);
  Tensor<T> out(Shape{1}, track);
  out.ptr()[0] = static_cast<T>(total / static_cast<double>(batch));
  if (track) {
    std::vector<int> kept(labels.begin(), labels.end());
    record([logits, out, probs, kept, batch, classes]() mutable {
      const T g = out.grad_ptr()[0] / static_cast<T>(batch);
      for (std::size_t r = 0; r < batch; ++r) {
        T* gz = logits.grad_ptr() + r * classes;
        const T* p = probs->data() + r * classes;
        for (std::size_t c = 0; c < classes; ++c) {
          const T onehot = static_cast<std::size_t>(kept[r]) == c ? T(1) : T(0);
          gz[c] += g * (p[c] - onehot);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t width = x.shape().back();
  if (width == 0 || gamma.numel() != width || beta.numel() != width) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) + " vs gamma " + shape_str(gamma.shape()) +
                         " / beta " + shape_str(beta.shape()));
  }
  const std::size_t rows = x.numel() / width;
  auto normalized = std::make_shared<std::vector<T>>(x.numel());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  const bool track = tracking(x, gamma, beta);
  Tensor<T> out(x.shape(), track);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.ptr() + r * width;
    double mu = 0.0;
    for (std::size_t c = 0; c < width; ++c) mu += xr[c];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      const double d = xr[c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(width);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    (*inv_std)[r] = static_cast<T>(rstd);
    T* xh = normalized->data() + r * width;
    T* yr = out.ptr() + r * width;
    for (std::size_t c = 0; c < width; ++c) {
      xh[c] = static_cast<T>((xr[c] - mu) * rstd);
      yr[c] = gamma.ptr()[c] * xh[c] + beta.ptr()[c];
    }
  }
  if (track) {
    record([x, gamma, beta, out, normalized, inv_std, rows, width]() mutable {
      std::vector<T> dxh(width);
      for (std::size_t r = 0; r < rows; ++r) {
        const T* g = out.grad_ptr() + r * width;
        const T* xh = normalized->data() + r * width;
        if (gamma.requires_grad()) {
          for (std::size_t c = 0; c < width; ++c) gamma.grad_ptr()[c] += g[c] * xh[c];
        }
        if (beta.requires_grad()) {
          for (std::size_t c = 0; c < width; ++c) beta.grad_ptr()[c] += g[c];
        }
        if (!x.requires_grad()) continue;
        double mean_dxh = 0.0, mean_dxh_xh = 0.0;
        for (std::size_t c = 0; c < width; ++c) {
          dxh[c] = g[c] * gamma.ptr()[c];
          mean_dxh += dxh[c];
          mean_dxh_xh += static_cast<double>(dxh[c]) * xh[c];
        }
        mean_dxh /= static_cast<double>(width);
        mean_dxh_xh /= static_cast<double>(width);
        T* gx = x.grad_ptr() + r * width;
        const double rstd = (*inv_std)[r];
        for (std::size_t c = 0; c < width; ++c) {
          gx[c] += static_cast<T>(rstd * (dxh[c] - mean_dxh - xh[c] * mean_dxh_xh));
        }
      }
    });
  }
  return out;
}

// ---- recurrent cell -------------------------------------------------------

namespace {

// Gate activations of one row: sigmoid on i, f, o and tanh on g, written to s.
template <typename T>
void gate_activations(const T* a, T* s, std::size_t width) {
  for (std::size_t j = 0; j < 4 * width; ++j) {
    s[j] = j / width == 2 ? std::tanh(a[j]) : T(1) / (T(1) + std::exp(-a[j]));
  }
}

// Cephes-style expf: range reduction to [-ln2/2, ln2/2] plus a degree-6
// polynomial, about 2 ulp. Branch-free so the loops below vectorize; libm's
// scalar expf/tanhf made the LSTM step the slowest op in training.
inline float exp_poly(float x) {
  x = x < -87.0f ? -87.0f : x;
  x = x > 88.0f ? 88.0f : x;
  const float n = (x * 1.44269504088896341f + 12582912.0f) - 12582912.0f;  // round to nearest
  x -= n * 0.693359375f;
  x -= n * -2.12194440e-4f;
  float y = 1.9875691500e-4f;
  y = y * x + 1.3981999507e-3f;
  y = y * x + 8.3334519073e-3f;
  y = y * x + 4.1665795894e-2f;
  y = y * x + 1.6666665459e-1f;
  y = y * x + 5.0000001201e-1f;
  y = y * x * x + x + 1.0f;
  return y * std::bit_cast<float>((static_cast<std::int32_t>(n) + 127) << 23);
}

// NaN inputs pass through so the divergence check still sees them.
inline void sigmoid_span(const float* x, float* y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const float v = 1.0f / (1.0f + exp_poly(-x[j]));
    y[j] = x[j] != x[j] ? x[j] : v;
  }
}

// tanh(x) = 2 sigmoid(2x) - 1
inline void tanh_span(const float* x, float* y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const float v = 2.0f / (1.0f + exp_poly(-2.0f * x[j])) - 1.0f;
    y[j] = x[j] != x[j] ? x[j] : v;
  }
}

template <>
void gate_activations<float>(const float* a, float* s, std::size_t width) {
  sigmoid_span(a, s, 2 * width);
  tanh_span(a + 2 * width, s + 2 * width, width);
  sigmoid_span(a + 3 * width, s + 3 * width, width);
}

template <typename T>
void tanh_row(const T* x, T* y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] = std::tanh(x[j]);
}

template <>
void tanh_row<float>(const float* x, float* y, std::size_t n) {
  tanh_span(x, y, n);
}

}  // namespace

template <typename T>
LstmState<T> lstm_pointwise(const Tensor<T>& gates, const Tensor<T>& c) {
  if (gates.rank() != 2 || c.rank() != 2 || gates.dim(0) != c.dim(0) || gates.dim(1) != 4 * c.dim(1)) {
    throw DimensionError("lstm: gates " + shape_str(gates.shape()) + " do not match state " + shape_str(c.shape()));
  }
  const std::size_t batch = c.dim(0), width = c.dim(1);
  const bool track = tracking(gates, c);
  LstmState<T> next{Tensor<T>(c.shape(), track), Tensor<T>(c.shape(), track)};
  // Activated gates [B x 4C] and tanh(c') [B x C] are kept for the adjoint.
  auto act = std::make_shared<std::vector<T>>(gates.numel());
  auto tanh_c = std::make_shared<std::vector<T>>(c.numel());
  for (std::size_t b = 0; b < batch; ++b) {
    const T* a = gates.ptr() + b * 4 * width;
    T* s = act->data() + b * 4 * width;
    gate_activations(a, s, width);
    T* cn = next.c.ptr() + b * width;
    T* tc = tanh_c->data() + b * width;
    const T* cp = c.ptr() + b * width;
    for (std::size_t j = 0; j < width; ++j) cn[j] = s[width + j] * cp[j] + s[j] * s[2 * width + j];
    tanh_row(cn, tc, width);
    T* hn = next.h.ptr() + b * width;
    for (std::size_t j = 0; j < width; ++j) hn[j] = s[3 * width + j] * tc[j];
  }
  if (track) {
    record([gates, c, next, act, tanh_c, batch, width]() mutable {
      for (std::size_t b = 0; b < batch; ++b) {
        const T* s = act->data() + b * 4 * width;
        for (std::size_t j = 0; j < width; ++j) {
          const std::size_t idx = b * width + j;
          const T i = s[j], f = s[width + j], g = s[2 * width + j], o = s[3 * width + j];
          const T tc = (*tanh_c)[idx];
          const T dh = next.h.grad_ptr()[idx];
          const T dc = next.c.grad_ptr()[idx] + dh * o * (T(1) - tc * tc);
          if (gates.requires_grad()) {
            T* ga = gates.grad_ptr() + b * 4 * width;
            ga[j] += dc * g * i * (T(1) - i);
            ga[width + j] += dc * c.ptr()[idx] * f * (T(1) - f);
            ga[2 * width + j] += dc * i * (T(1) - g * g);
            ga[3 * width + j] += dh * tc * o * (T(1) - o);
          }
          if (c.requires_grad()) c.grad_ptr()[idx] += dc * f;
        }
      }
    });
  }
  return next;
}

template <typename T>
LstmState<T> lstm_cell(const Tensor<T>& x, const Tensor<T>& h, const Tensor<T>& c, const LstmParams<T>& params) {
  if (x.rank() != 2 || h.rank() != 2 || c.rank() != 2 || h.shape() != c.shape() || x.dim(0) != h.dim(0)) {
    throw DimensionError("lstm_cell: x " + shape_str(x.shape()) + ", h " + shape_str(h.shape()) + ", c " +
                         shape_str(c.shape()) + " are inconsistent");
  }
  const std::size_t width = h.dim(1);
  if (params.w_input.rank() != 2 || params.w_input.dim(0) != x.dim(1) || params.w_input.dim(1) != 4 * width ||
      params.w_hidden.rank() != 2 || params.w_hidden.dim(0) != width || params.w_hidden.dim(1) != 4 * width ||
      params.bias.numel() != 4 * width) {
    throw DimensionError("lstm_cell: parameter widths do not match x " + shape_str(x.shape()) + " / h " +
                         shape_str(h.shape()));
  }
  const Tensor<T> gates = add(linear(x, params.w_input, params.bias), matmul(h, params.w_hidden));
  return lstm_pointwise(gates, c);
}

// ---- attention -------------------------------------------------------------

namespace {

struct AttentionDims {
  std::size_t groups, tokens, steps, width, heads, head_width;
};

template <typename T>
AttentionDims attention_dims(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads) {
  if (q.rank() != 4 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("attention: q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) + ", v " +
                         shape_str(v.shape()) + " must share a [G x A x T x C] shape");
  }
  if (heads == 0 || q.dim(3) % heads != 0) {
    throw DimensionError("attention: width " + std::to_string(q.dim(3)) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  return {q.dim(0), q.dim(1), q.dim(2), q.dim(3), heads, q.dim(3) / heads};
}

// Fills probs [G x T x H x A x A].
template <typename T>
void attention_probs(const AttentionDims& d, const T* q, const T* k, T* probs) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.head_width));
  const std::size_t A = d.tokens;
  std::vector<double> scores(A);
  for (std::size_t g = 0; g < d.groups; ++g) {
    for (std::size_t t = 0; t < d.steps; ++t) {
      for (std::size_t h = 0; h < d.heads; ++h) {
        T* p = probs + (((g * d.steps + t) * d.heads + h) * A) * A;
        for (std::size_t a1 = 0; a1 < A; ++a1) {
          const T* qa = q + ((g * A + a1) * d.steps + t) * d.width + h * d.head_width;
          double peak = -INFINITY;
          for (std::size_t a2 = 0; a2 < A; ++a2) {
            const T* ka = k + ((g * A + a2) * d.steps + t) * d.width + h * d.head_width;
            double s = 0.0;
            for (std::size_t c = 0; c < d.head_width; ++c) s += static_cast<double>(qa[c]) * ka[c];
            scores[a2] = s * scale;
            peak = std::max(peak, scores[a2]);
          }
          double total = 0.0;
          for (std::size_t a2 = 0; a2 < A; ++a2) {
            scores[a2] = std::exp(scores[a2] - peak);
            total += scores[a2];
          }
          for (std::size_t a2 = 0; a2 < A; ++a2) p[a1 * A + a2] = static_cast<T>(scores[a2] / total);
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads) {
  const AttentionDims d = attention_dims(q, k, k, heads);
  Tensor<T> probs(Shape{d.groups, d.steps, d.heads, d.tokens, d.tokens});
  attention_probs(d, q.ptr(), k.ptr(), probs.ptr());
  return probs;
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads) {
  const AttentionDims d = attention_dims(q, k, v, heads);
  const std::size_t A = d.tokens;
  auto probs = std::make_shared<std::vector<T>>(d.groups * d.steps * d.heads * A * A);
  attention_probs(d, q.ptr(), k.ptr(), probs->data());

  const bool track = tracking(q, k, v);
  Tensor<T> out(q.shape(), track);
  auto offset = [d](std::size_t g, std::size_t a, std::size_t t, std::size_t h) {
    return ((g * d.tokens + a) * d.steps + t) * d.width + h * d.head_width;
  };
  for (std::size_t g = 0; g < d.groups; ++g) {
    for (std::size_t t = 0; t < d.steps; ++t) {
      for (std::size_t h = 0; h < d.heads; ++h) {
        const T* p = probs->data() + (((g * d.steps + t) * d.heads + h) * A) * A;
        for (std::size_t a1 = 0; a1 < A; ++a1) {
          T* o = out.ptr() + offset(g, a1, t, h);
          for (std::size_t a2 = 0; a2 < A; ++a2) {
            const T* va = v.ptr() + offset(g, a2, t, h);
            const T w = p[a1 * A + a2];
            for (std::size_t c = 0; c < d.head_width; ++c) o[c] += w * va[c];
          }
        }
      }
    }
  }
  if (track) {
    record([q, k, v, out, probs, d, offset]() mutable {
      const std::size_t A = d.tokens;
      const double scale = 1.0 / std::sqrt(static_cast<double>(d.head_width));
      std::vector<double> dp(A * A), ds(A * A);
      for (std::size_t g = 0; g < d.groups; ++g) {
        for (std::size_t t = 0; t < d.steps; ++t) {
          for (std::size_t h = 0; h < d.heads; ++h) {
            const T* p = probs->data() + (((g * d.steps + t) * d.heads + h) * A) * A;
            for (std::size_t a1 = 0; a1 < A; ++a1) {
              const T* go = out.grad_ptr() + offset(g, a1, t, h);
              for (std::size_t a2 = 0; a2 < A; ++a2) {
                const T* va = v.ptr() + offset(g, a2, t, h);
                double acc = 0.0;
                for (std::size_t c = 0; c < d.head_width; ++c) acc += static_cast<double>(go[c]) * va[c];
                dp[a1 * A + a2] = acc;
                if (v.requires_grad()) {
                  T* gv = v.grad_ptr() + offset(g, a2, t, h);
                  const T w = p[a1 * A + a2];
                  for (std::size_t c = 0; c < d.head_width; ++c) gv[c] += w * go[c];
                }
              }
              double row = 0.0;
              for (std::size_t a2 = 0; a2 < A; ++a2) row += p[a1 * A + a2] * dp[a1 * A + a2];
              for (std::size_t a2 = 0; a2 < A; ++a2) ds[a1 * A + a2] = p[a1 * A + a2] * (dp[a1 * A + a2] - row) * scale;
            }
            for (std::size_t a1 = 0; a1 < A; ++a1) {
              for (std::size_t a2 = 0; a2 < A; ++a2) {
                const T s = static_cast<T>(ds[a1 * A + a2]);
                if (q.requires_grad()) {
                  T* gq = q.grad_ptr() + offset(g, a1, t, h);
                  const T* ka = k.ptr() + offset(g, a2, t, h);
                  for (std::size_t c = 0; c < d.head_width; ++c) gq[c] += s * ka[c];
                }
                if (k.requires_grad()) {
                  T* gk = k.grad_ptr() + offset(g, a2, t, h);
                  const T* qa = q.ptr() + offset(g, a1, t, h);
                  for (std::size_t c = 0; c < d.head_width; ++c) gk[c] += s * qa[c];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// ---- instantiations ------------------------------------------------------

#define CAMD_INSTANTIATE_OPS(T)                                                                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> scale(const Tensor<T>&, T);                                                        \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                          \
  template Tensor<T> sum(const Tensor<T>&);                                                             \
  template Tensor<T> mean(const Tensor<T>&);                                                            \
  template Tensor<T> mean_axis(const Tensor<T>&, std::size_t);                                          \
  template Tensor<T> permute(const Tensor<T>&, std::span<const std::size_t>);                           \
  template Tensor<T> select(const Tensor<T>&, std::size_t, std::size_t);                                \
  template Tensor<T> stack(std::span<const Tensor<T>>, std::size_t);                                    \
  template Tensor<T> repeat_axis(const Tensor<T>&, std::size_t, std::size_t);                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> softmax(const Tensor<T>&);                                                         \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>);                             \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template LstmState<T> lstm_pointwise(const Tensor<T>&, const Tensor<T>&);                             \
  template LstmState<T> lstm_cell(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const LstmParams<T>&); \
  template Tensor<T> attention_weights(const Tensor<T>&, const Tensor<T>&, std::size_t);                \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t);

CAMD_INSTANTIATE_OPS(float)
CAMD_INSTANTIATE_OPS(double)

#undef CAMD_INSTANTIATE_OPS

}  // namespace camd::diff
