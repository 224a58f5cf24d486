#include "camd/model/camd.h"

#include <cmath>
#include <string>

#include "camd/common/error.h"
#include "camd/common/rng.h"

namespace camd::model {

using namespace camd::diff;

namespace {

template <typename T>
class Builder {
 public:
  Builder(std::vector<NamedParam<T>>& out, std::uint64_t seed) : out_(out), rng_(seed) {}

  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor<T> uniform(const std::string& name, Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<T> values(shape_numel(shape));
    for (auto& v : values) v = static_cast<T>(rng_.uniform(-bound, bound));
    return add(name, Tensor<T>(std::move(shape), std::move(values), true));
  }

  Tensor<T> constant(const std::string& name, Shape shape, T value) {
    return add(name, Tensor<T>::full(std::move(shape), value, true));
  }

  Tensor<T> add(const std::string& name, Tensor<T> t) {
    out_.push_back({name, t});
    return t;
  }

 private:
  std::vector<NamedParam<T>>& out_;
  Rng rng_;
};

template <typename T>
Extractor<T> build_extractor(Builder<T>& b, const std::string& prefix, const ModelConfig& cfg, std::size_t width,
                             std::size_t heads, std::size_t n_blocks, std::size_t n_lstm) {
  Extractor<T> e;
  e.heads = heads;
  const std::size_t C = width, F = cfg.ffn_mult * width, k = cfg.kernel;
  e.embed.proj_w = b.uniform(prefix + "embed.proj.w", {2, C}, 2);
  e.embed.proj_b = b.constant(prefix + "embed.proj.b", {C}, T(0));
  for (std::size_t i = 0; i < cfg.K_c; ++i) {
    const std::string p = prefix + "embed.conv" + std::to_string(i);
    e.embed.conv_w.push_back(b.uniform(p + ".w", {k, C, C}, k * C));
    e.embed.conv_b.push_back(b.constant(p + ".b", {C}, T(0)));
  }
  for (std::size_t i = 0; i < n_blocks; ++i) {
    const std::string p = prefix + "block" + std::to_string(i);
    BlockParams<T> blk;
    blk.ln1_g = b.constant(p + ".ln1.g", {C}, T(1));
    blk.ln1_b = b.constant(p + ".ln1.b", {C}, T(0));
    blk.wq = b.uniform(p + ".attn.wq", {C, C}, C);
    blk.wk = b.uniform(p + ".attn.wk", {C, C}, C);
    blk.wv = b.uniform(p + ".attn.wv", {C, C}, C);
    blk.wo = b.uniform(p + ".attn.wo", {C, C}, C);
    blk.ln2_g = b.constant(p + ".ln2.g", {C}, T(1));
    blk.ln2_b = b.constant(p + ".ln2.b", {C}, T(0));
    blk.w1 = b.uniform(p + ".ffn.w1", {C, F}, C);
    blk.w2 = b.uniform(p + ".ffn.w2", {C, F}, C);
    blk.w3 = b.uniform(p + ".ffn.w3", {F, C}, F);
    e.blocks.push_back(std::move(blk));
  }
  for (std::size_t i = 0; i < n_lstm; ++i) {
    const std::string p = prefix + "lstm" + std::to_string(i);
    LstmParams<T> l;
    l.w_input = b.uniform(p + ".w_input", {C, 4 * C}, C);
    l.w_hidden = b.uniform(p + ".w_hidden", {C, 4 * C}, C);
    std::vector<T> bias(4 * C, T(0));
    for (std::size_t j = C; j < 2 * C; ++j) bias[j] = T(1);  // forget gate
    l.bias = b.add(p + ".bias", Tensor<T>({4 * C}, std::move(bias), true));
    e.lstm.push_back(std::move(l));
  }
  return e;
}

template <typename T>
Tensor<T> run_blocks(Tensor<T> x, const Extractor<T>& e) {
  for (const auto& blk : e.blocks) x = antenna_block(x, blk, e.heads);
  return x;
}

template <typename T>
void require_finite_input(const Tensor<T>& x) {
  for (T v : x.data())
    if (!std::isfinite(v)) throw NumericInputError("camd: non-finite value in input frame");
}

}  // namespace

template <typename T>
Camd<T>::Camd(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Builder<T> b(params_, seed);
  if (config_.has_cc()) {
    cc_ = build_extractor(b, "cc.", config_, config_.C_cc, config_.heads_cc, config_.K_t, config_.K_l);
    // Zero head: the predicted compensation starts as the identity pattern.
    head_w_ = b.constant("cc.head.w", {config_.C_cc, 2 * config_.nt}, T(0));
    head_b_ = b.constant("cc.head.b", {2 * config_.nt}, T(0));
  }
  main_ = build_extractor(b, "", config_, config_.C, config_.heads, config_.transformer_depth(), config_.lstm_depth());
  cls_w_ = b.uniform("classifier.w", {config_.C, config_.num_classes}, config_.C);
  cls_b_ = b.constant("classifier.b", {config_.num_classes}, T(0));
}

template <typename T>
Tensor<T> Camd<T>::cc_predict(const Tensor<T>& x) const {
  if (!config_.has_cc()) throw ContractError("cc_predict: variant " + std::string(variant_name(config_.variant)) +
                                             " has no compensation module");
  require_finite_input(x);
  const std::size_t B = x.dim(0), nr = config_.nr, nt = config_.nt;
  Tensor<T> feats = run_blocks(embed(x, cc_.embed, config_.kernel), cc_);
  const Tensor<T> offset = linear(lstm_final_state(feats, cc_.lstm), head_w_, head_b_);  // [B x Nr x 2Nt]
  Tensor<T> pattern({B, nr, 2 * nt});
  for (std::size_t g = 0; g < B; ++g)
    for (std::size_t j = 0; j < std::min(nr, nt); ++j) pattern.data()[(g * nr + j) * 2 * nt + 2 * j] = T(1);
  return repeat_axis(add(offset, pattern).reshape({B, nr, nt, 2}), 3, config_.length);
}

template <typename T>
Tensor<T> Camd<T>::extract(const Tensor<T>& r) const {
  const Tensor<T> feats = run_blocks(embed(r, main_.embed, config_.kernel), main_);
  switch (config_.variant) {
    case Variant::full:
    case Variant::no_cc:
    case Variant::lstm_only:
      return temporal_stage(feats, main_.lstm, cls_w_, cls_b_);
    case Variant::transformer_only:
    case Variant::cnn_only:
      return linear(mean_axis(mean_axis(feats, 2), 1), cls_w_, cls_b_);
  }
  throw ContractError("camd: unhandled variant");
}

template <typename T>
Tensor<T> Camd<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != config_.nr || x.dim(2) != config_.length || x.dim(3) != 2) {
    throw DimensionError("camd: input " + shape_str(x.shape()) + " does not match [B x " + std::to_string(config_.nr) +
                         " x " + std::to_string(config_.length) + " x 2]");
  }
  require_finite_input(x);
  if (!config_.has_cc()) return extract(x);
  return extract(cc_apply(cc_predict(x), x));
}

template <typename T>
std::vector<Tensor<T>> Camd<T>::parameter_tensors() const {
  std::vector<Tensor<T>> out;
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

template <typename T>
Tensor<T>* Camd<T>::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p.value;
  return nullptr;
}

template <typename T>
std::size_t Camd<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

template <typename T>
void Camd<T>::zero_grad() const {
  for (const auto& p : params_) p.value.zero_grad();
}

template <typename To, typename From>
void copy_parameters(const Camd<From>& from, Camd<To>& to) {
  const auto& src = from.parameters();
  auto& dst = to.parameters();
  if (src.size() != dst.size()) throw DimensionError("copy_parameters: parameter lists differ");
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src[k].name != dst[k].name || src[k].value.shape() != dst[k].value.shape())
      throw DimensionError("copy_parameters: mismatch at " + src[k].name);
    auto in = src[k].value.data();
    auto out = dst[k].value.data();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<To>(in[i]);
  }
}

template class Camd<float>;
template class Camd<double>;
template void copy_parameters(const Camd<float>&, Camd<double>&);
template void copy_parameters(const Camd<double>&, Camd<float>&);
template void copy_parameters(const Camd<float>&, Camd<float>&);
template void copy_parameters(const Camd<double>&, Camd<double>&);

}  // namespace camd::model
