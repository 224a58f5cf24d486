#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace camd::model {

enum class Variant { full, no_cc, transformer_only, lstm_only, cnn_only };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);  // ConfigError on unknown names

inline constexpr Variant kAllVariants[] = {Variant::full, Variant::no_cc, Variant::transformer_only,
                                           Variant::lstm_only, Variant::cnn_only};

struct ModelConfig {
  std::size_t num_classes = 5;
  std::size_t nt = 2;
  std::size_t nr = 2;
  std::size_t length = 128;
  std::size_t C = 64;
  std::size_t C_cc = 32;
  std::size_t K_c = 2;
  std::size_t K_t = 2;
  std::size_t K_l = 2;
  std::size_t heads = 4;
  std::size_t heads_cc = 2;
  std::size_t ffn_mult = 2;
  std::size_t kernel = 3;
  Variant variant = Variant::full;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  bool has_cc() const { return variant != Variant::no_cc; }
  // Antenna count seen by the extractor: Nt after compensation, Nr without it.
  std::size_t extractor_antennas() const { return has_cc() ? nt : nr; }
  std::size_t embedded_length() const { return length >> K_c; }

  // Single-domain variants fold both stacks into the one they keep.
  std::size_t transformer_depth() const;
  std::size_t lstm_depth() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

// Full-size 2x2 shapes: C=64, C_cc=32, K=30, L=256.
ModelConfig reference_config();

// The small configuration used by the end-to-end gradient check.
ModelConfig tiny_config();

}  // namespace camd::model
