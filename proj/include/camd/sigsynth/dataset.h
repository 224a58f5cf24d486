#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "camd/common/rng.h"

namespace camd::sig {

struct DatasetSpec {
  std::vector<std::string> classes;
  std::size_t nt = 2;
  std::size_t nr = 2;
  std::size_t length = 128;
  std::vector<double> snr_db;
  std::size_t frames_per_stratum = 100;
  std::uint64_t seed = 0;
  bool keep_clean = false;
  // Per-slot Gauss-Markov channel drift instead of pure block fading.
  bool drift = false;
  double drift_rho = 0.999;
};

struct SignalFrame {
  std::uint16_t label = 0;
  float snr_db = 0.0f;
  std::vector<float> iq;     // [Nr x L x 2]
  std::vector<float> clean;  // [Nt x L x 2] or empty
};

struct Dataset {
  std::uint32_t rng_id = kRngId;
  std::uint16_t nr = 0;
  std::uint16_t nt = 0;
  std::uint32_t length = 0;
  std::vector<std::string> class_names;
  bool has_clean = false;
  std::vector<SignalFrame> frames;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t frame_floats() const { return std::size_t{nr} * length * 2; }
};

// Frames are ordered by (class, snr, repetition); frame n draws everything
// from Rng(derive_seed(seed, n)), so the result does not depend on the number
// of worker threads.
Dataset generate_dataset(const DatasetSpec& spec);

inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::uint8_t> serialize_dataset(const Dataset& d);
Dataset deserialize_dataset(const std::vector<std::uint8_t>& bytes);

void write_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace camd::sig
