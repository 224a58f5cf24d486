#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "camd/model/camd.h"

namespace camd::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<float> data;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<CheckpointEntry> entries;
};

std::vector<std::uint8_t> serialize_checkpoint(const Camd<float>& model);

// Parses the container without building a model.
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

// Rebuilds the model; unknown names, duplicates, missing parameters and shape
// mismatches are FormatErrors.
Camd<float> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Camd<float>& model, const std::filesystem::path& path);
Camd<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace camd::model
