#include <string>

#include "camd/common/binio.h"
#include "camd/common/error.h"
#include "camd/sigsynth/dataset.h"

namespace camd::sig {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'M', 'D'};

std::size_t frame_bytes(const Dataset& d) {
  std::size_t n = sizeof(std::uint16_t) + sizeof(float) + d.frame_floats() * sizeof(float);
  if (d.has_clean) n += std::size_t{d.nt} * d.length * 2 * sizeof(float);
  return n;
}

}  // namespace

std::vector<std::uint8_t> serialize_dataset(const Dataset& d) {
  const std::size_t clean_floats = std::size_t{d.nt} * d.length * 2;
  ByteWriter w;
  w.put_raw(kMagic, 4);
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint32_t>(d.rng_id);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.frames.size()));
  w.put<std::uint16_t>(d.nr);
  w.put<std::uint16_t>(d.nt);
  w.put<std::uint32_t>(d.length);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(d.class_names.size()));
  w.put<std::uint8_t>(d.has_clean ? 1 : 0);
  for (const auto& name : d.class_names) w.put_string16(name);
  w.bytes().reserve(w.bytes().size() + d.frames.size() * frame_bytes(d));
  for (const auto& f : d.frames) {
    if (f.iq.size() != d.frame_floats() || (d.has_clean && f.clean.size() != clean_floats))
      throw DimensionError("serialize_dataset: frame payload does not match the header dimensions");
    w.put<std::uint16_t>(f.label);
    w.put<float>(f.snr_db);
    w.put_floats(f.iq);
    if (d.has_clean) w.put_floats(f.clean);
  }
  return std::move(w.bytes());
}

Dataset deserialize_dataset(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw MagicError("dataset: bad magic, not a CAMD file");
  r.get<std::uint32_t>();
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion)
    throw VersionError("dataset: version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kDatasetVersion) + ")");
  Dataset d;
  d.rng_id = r.get<std::uint32_t>();
  const auto num_frames = r.get<std::uint32_t>();
  d.nr = r.get<std::uint16_t>();
  d.nt = r.get<std::uint16_t>();
  d.length = r.get<std::uint32_t>();
  const auto num_classes = r.get<std::uint16_t>();
  const auto has_clean = r.get<std::uint8_t>();
  if (has_clean > 1) throw FormatError("dataset: has_clean flag must be 0 or 1");
  d.has_clean = has_clean == 1;
  for (std::uint16_t c = 0; c < num_classes; ++c) d.class_names.push_back(r.get_string16());

  const std::size_t expected = r.position() + std::size_t{num_frames} * frame_bytes(d);
  if (bytes.size() < expected) throw TruncationError(expected, bytes.size());
  if (bytes.size() > expected)
    throw FormatError("dataset: " + std::to_string(bytes.size() - expected) + " trailing bytes after last frame");

  d.frames.resize(num_frames);
  for (auto& f : d.frames) {
    f.label = r.get<std::uint16_t>();
    if (f.label >= num_classes)
      throw FormatError("dataset: frame label " + std::to_string(f.label) + " exceeds class count");
    f.snr_db = r.get<float>();
    f.iq.resize(d.frame_floats());
    r.get_floats(f.iq);
    if (d.has_clean) {
      f.clean.resize(std::size_t{d.nt} * d.length * 2);
      r.get_floats(f.clean);
    }
  }
  return d;
}

void write_dataset(const Dataset& d, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_dataset(d));
}

Dataset read_dataset(const std::filesystem::path& path) { return deserialize_dataset(read_file_bytes(path)); }

}  // namespace camd::sig
