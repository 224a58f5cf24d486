#include "camd/diffcore/adamw.h"

#include <cmath>

namespace camd::diff {

template <typename T>
AdamWState<T> AdamWState<T>::for_params(std::span<const Tensor<T>> params, AdamWOptions options) {
  AdamWState state;
  state.options = options;
  for (const auto& p : params) {
    state.m.emplace_back(p.numel(), T(0));
    state.v.emplace_back(p.numel(), T(0));
  }
  return state;
}

template <typename T>
void adamw_step(std::span<Tensor<T>> params, AdamWState<T>& state) {
  if (params.size() != state.m.size()) {
    throw DimensionError("adamw_step: " + std::to_string(params.size()) + " parameters but state tracks " +
                         std::to_string(state.m.size()));
  }
  const AdamWOptions& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T bias1 = static_cast<T>(1.0 - std::pow(o.beta1, t));
  const T bias2 = static_cast<T>(1.0 - std::pow(o.beta2, t));
  const T decay = static_cast<T>(1.0 - o.lr * o.weight_decay);
  const T lr = static_cast<T>(o.lr);
  const T b1 = static_cast<T>(o.beta1), b2 = static_cast<T>(o.beta2), eps = static_cast<T>(o.eps);

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<T>& param = params[p];
    if (state.m[p].size() != param.numel()) {
      throw DimensionError("adamw_step: moment size does not match parameter " + shape_str(param.shape()));
    }
    if (!param.requires_grad()) continue;
    T* w = param.ptr();
    const T* g = param.grad_ptr();
    T* m = state.m[p].data();
    T* v = state.v[p].data();
    const std::size_t n = param.numel();
    for (std::size_t i = 0; i < n; ++i) {
      if (o.weight_decay != 0.0) w[i] *= decay;
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const T m_hat = m[i] / bias1;
      const T v_hat = v[i] / bias2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template struct AdamWState<float>;
template struct AdamWState<double>;
template void adamw_step<float>(std::span<Tensor<float>>, AdamWState<float>&);
template void adamw_step<double>(std::span<Tensor<double>>, AdamWState<double>&);

}  // namespace camd::diff
