#include "camd/model/config.h"

#include <string>

#include "camd/common/error.h"
#include "json.hpp"

namespace camd::model {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("model config: " + what);
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_cc: return "no_cc";
    case Variant::transformer_only: return "transformer_only";
    case Variant::lstm_only: return "lstm_only";
    case Variant::cnn_only: return "cnn_only";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants)
    if (variant_name(v) == name) return v;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected full, no_cc, transformer_only, lstm_only or cnn_only)");
}

void ModelConfig::validate() const {
  require(num_classes >= 2, "need at least 2 classes");
  require(nt >= 1 && nr >= nt, "need 1 <= Nt <= Nr");
  require(C >= 1 && C_cc >= 1, "widths must be positive");
  require(heads >= 1 && C % heads == 0, "C=" + std::to_string(C) + " is not divisible by heads=" + std::to_string(heads));
  require(heads_cc >= 1 && C_cc % heads_cc == 0,
          "C_cc=" + std::to_string(C_cc) + " is not divisible by heads_cc=" + std::to_string(heads_cc));
  require(kernel % 2 == 1, "kernel must be odd");
  require(ffn_mult >= 1, "ffn_mult must be positive");
  require(K_c <= 16, "K_c too large");
  const std::size_t shrink = std::size_t{1} << K_c;
  require(length % shrink == 0, "L=" + std::to_string(length) + " must be divisible by 2^K_c=" + std::to_string(shrink));
  require(length >= shrink * kernel, "L=" + std::to_string(length) + " is shorter than 2^K_c * kernel");
  require(transformer_depth() + lstm_depth() >= 1 || variant == Variant::cnn_only, "empty extractor");
  if (variant == Variant::full || variant == Variant::no_cc || variant == Variant::lstm_only)
    require(lstm_depth() >= 1, "LSTM stack needs at least one layer");
  if (has_cc()) require(K_l >= 1, "the compensation stack needs at least one LSTM layer");
}

std::size_t ModelConfig::transformer_depth() const {
  switch (variant) {
    case Variant::full:
    case Variant::no_cc: return K_t;
    case Variant::transformer_only: return K_t + K_l;
    case Variant::lstm_only:
    case Variant::cnn_only: return 0;
  }
  return 0;
}

std::size_t ModelConfig::lstm_depth() const {
  switch (variant) {
    case Variant::full:
    case Variant::no_cc: return K_l;
    case Variant::lstm_only: return K_t + K_l;
    case Variant::transformer_only:
    case Variant::cnn_only: return 0;
  }
  return 0;
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["num_classes"] = num_classes;
  j["nt"] = nt;
  j["nr"] = nr;
  j["length"] = length;
  j["C"] = C;
  j["C_cc"] = C_cc;
  j["K_c"] = K_c;
  j["K_t"] = K_t;
  j["K_l"] = K_l;
  j["heads"] = heads;
  j["heads_cc"] = heads_cc;
  j["ffn_mult"] = ffn_mult;
  j["kernel"] = kernel;
  j["variant"] = std::string(variant_name(variant));
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config JSON must be an object");
  ModelConfig c;
  std::size_t* fields[] = {&c.num_classes, &c.nt,  &c.nr,      &c.length, &c.C,        &c.C_cc,  &c.K_c,
                           &c.K_t,         &c.K_l, &c.heads, &c.heads_cc, &c.ffn_mult, &c.kernel};
  const char* names[] = {"num_classes", "nt", "nr", "length", "C", "C_cc", "K_c", "K_t", "K_l", "heads", "heads_cc",
                         "ffn_mult", "kernel"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = it.key() == "variant";
    for (const char* n : names) known = known || it.key() == n;
    if (!known) throw ConfigError("model config JSON: unknown key '" + it.key() + "'");
  }
  try {
    for (std::size_t k = 0; k < std::size(names); ++k)
      if (j.contains(names[k])) *fields[k] = j.at(names[k]).get<std::size_t>();
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig reference_config() {
  ModelConfig c;
  c.num_classes = 30;
  c.length = 256;
  c.C = 64;
  c.C_cc = 32;
  c.heads = 4;
  c.heads_cc = 2;
  return c;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.num_classes = 3;
  c.length = 16;
  c.C = 8;
  c.C_cc = 4;
  c.heads = 2;
  c.heads_cc = 2;
  return c;
}

}  // namespace camd::model
