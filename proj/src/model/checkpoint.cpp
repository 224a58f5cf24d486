#include "camd/model/checkpoint.h"

#include <cstring>
#include <limits>
#include <set>

#include "camd/common/binio.h"
#include "camd/common/error.h"

namespace camd::model {

namespace {

constexpr char kMagic[4] = {'C', 'M', 'D', 'W'};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Camd<float>& model) {
  ByteWriter w;
  w.put_raw(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string cfg = model.config().to_json();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.size()));
  w.put_raw(cfg.data(), cfg.size());
  for (const auto& p : model.parameters()) {
    w.put_string16(p.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.put_floats(p.value.data());
  }
  return std::move(w.bytes());
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw MagicError("checkpoint: bad magic, not a CMDW file");
  ByteReader r(bytes);
  r.get<std::uint32_t>();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  const auto cfg_len = r.get<std::uint32_t>();
  const std::string cfg = r.get_text(cfg_len);

  Checkpoint ck;
  ck.config = ModelConfig::from_json(cfg);
  while (r.remaining() > 0) {
    CheckpointEntry e;
    e.name = r.get_string16();
    const auto rank = r.get<std::uint8_t>();
    std::size_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      e.dims.push_back(r.get<std::uint32_t>());
      n *= e.dims.back();
    }
    r.need(n * sizeof(float));
    e.data.resize(n);
    r.get_floats(e.data);
    ck.entries.push_back(std::move(e));
  }
  return ck;
}

Camd<float> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Checkpoint ck = parse_checkpoint(bytes);
  Camd<float> model(ck.config, 0);
  std::set<std::string> seen;
  for (auto& e : ck.entries) {
    Tensor<float>* t = model.find(e.name);
    if (t == nullptr) throw FormatError("checkpoint: unknown parameter '" + e.name + "'");
    if (!seen.insert(e.name).second) throw FormatError("checkpoint: duplicate parameter '" + e.name + "'");
    if (t->shape() != e.dims)
      throw FormatError("checkpoint: parameter '" + e.name + "' has shape " + diff::shape_str(e.dims) +
                        ", model expects " + diff::shape_str(t->shape()));
    std::copy(e.data.begin(), e.data.end(), t->data().begin());
  }
  for (const auto& p : model.parameters())
    if (!seen.count(p.name)) throw FormatError("checkpoint: missing parameter '" + p.name + "'");
  return model;
}

void save_checkpoint(const Camd<float>& model, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_checkpoint(model));
}

Camd<float> load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

}  // namespace camd::model
