#include "camd/model/camd.h"

namespace camd::model {

namespace {

struct StackShape {
  std::size_t width;
  std::size_t heads;
  std::size_t blocks;
  std::size_t lstm;
};

std::size_t stack_params(const ModelConfig& cfg, const StackShape& s) {
  const std::size_t C = s.width, F = cfg.ffn_mult * C;
  std::size_t n = 2 * C + C;                           // projection
  n += cfg.K_c * (cfg.kernel * C * C + C);             // convolutions
  n += s.blocks * (4 * C + 4 * C * C + 3 * C * F);     // two norms, Q/K/V/O, ReGLU
  n += s.lstm * (8 * C * C + 4 * C);                   // input + hidden weights, bias
  return n;
}

// Multiply-adds for one frame through a stack over `antennas` streams.
std::size_t stack_macs(const ModelConfig& cfg, const StackShape& s, std::size_t antennas) {
  const std::size_t C = s.width, F = cfg.ffn_mult * C, A = antennas;
  std::size_t len = cfg.length;
  std::size_t macs = A * len * 2 * C;
  for (std::size_t k = 0; k < cfg.K_c; ++k) {
    len /= 2;
    macs += A * len * cfg.kernel * C * C;
  }
  const std::size_t T = len;
  // Projections, scores and weighted values (A x A per slot), then the FFN.
  macs += s.blocks * (4 * A * T * C * C + 2 * T * A * A * C + A * T * 3 * C * F);
  macs += s.lstm * A * T * 8 * C * C;
  return macs;
}

}  // namespace

std::size_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  std::size_t n = 0;
  if (cfg.has_cc()) {
    n += stack_params(cfg, {cfg.C_cc, cfg.heads_cc, cfg.K_t, cfg.K_l});
    n += cfg.C_cc * 2 * cfg.nt + 2 * cfg.nt;
  }
  n += stack_params(cfg, {cfg.C, cfg.heads, cfg.transformer_depth(), cfg.lstm_depth()});
  n += cfg.C * cfg.num_classes + cfg.num_classes;
  return n;
}

std::size_t estimate_flops(const ModelConfig& cfg) {
  cfg.validate();
  std::size_t macs = 0;
  if (cfg.has_cc()) {
    macs += stack_macs(cfg, {cfg.C_cc, cfg.heads_cc, cfg.K_t, cfg.K_l}, cfg.nr);
    macs += cfg.nr * cfg.C_cc * 2 * cfg.nt;
    macs += cfg.nr * cfg.nt * cfg.length * 4;  // complex products in the compensation
  }
  macs += stack_macs(cfg, {cfg.C, cfg.heads, cfg.transformer_depth(), cfg.lstm_depth()}, cfg.extractor_antennas());
  macs += cfg.C * cfg.num_classes;
  return 2 * macs;
}

}  // namespace camd::model
