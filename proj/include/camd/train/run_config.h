#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "camd/model/config.h"
#include "camd/sigsynth/dataset.h"
#include "camd/train/split.h"
#include "camd/train/trainer.h"

namespace camd::train {

// Everything a run needs, set from flat dotted keys:
//
//   # comment
//   seed = 7
//   data.classes = bpsk,qpsk,psk8,qam16,qam64
//   data.snr_list = 0:4:20
//   model.C = 32
//   train.lr = 2e-3
//
// Unknown keys and malformed values are ConfigErrors. The split and training
// seeds default to streams derived from `seed`; the data seed defaults to it.
struct RunConfig {
  std::uint64_t seed = 0;
  sig::DatasetSpec data;
  SplitSpec split;
  model::ModelConfig model;
  TrainHyper train;
  float low_snr_db = -4.0f;

  RunConfig();

  void set(const std::string& key, const std::string& value);
  // "key = value" lines; '#' starts a comment.
  void parse(const std::string& text, const std::string& origin = "config");
  void load(const std::filesystem::path& path);

  bool is_set(const std::string& key) const { return explicit_.count(key) != 0; }

  // Every key with its effective value, in a fixed order. Parsing it back
  // gives the same configuration.
  std::string resolved_text() const;

  static const std::vector<std::string>& keys();

  // Model config with num_classes, nt, nr and length taken from the data.
  // ConfigError if one of them was set explicitly to something else.
  model::ModelConfig model_for(const sig::Dataset& d) const;

 private:
  void derive_seeds();
  std::set<std::string> explicit_;
};

// "a:step:b" (inclusive, step may be negative) or "a,b,c" or a single value.
std::vector<double> parse_snr_list(const std::string& text);

}  // namespace camd::train
