#include "camd/sigsynth/dataset.h"

#include <limits>

#include "camd/common/error.h"
#include "camd/common/parallel.h"
#include "camd/sigsynth/channel.h"
#include "camd/sigsynth/constellation.h"

namespace camd::sig {

namespace {

void check_spec(const DatasetSpec& spec) {
  if (spec.classes.empty()) throw ConfigError("dataset: class list is empty");
  if (spec.classes.size() > std::numeric_limits<std::uint16_t>::max()) throw ConfigError("dataset: too many classes");
  if (spec.snr_db.empty()) throw ConfigError("dataset: SNR list is empty");
  if (spec.length == 0) throw ConfigError("dataset: frame length must be positive");
  if (spec.frames_per_stratum == 0) throw ConfigError("dataset: frames per stratum must be positive");
  if (spec.nt < 1 || spec.nr < spec.nt) throw ConfigError("dataset: need 1 <= Nt <= Nr");
  if (spec.nr > std::numeric_limits<std::uint16_t>::max() || spec.length > std::numeric_limits<std::uint32_t>::max())
    throw ConfigError("dataset: dimensions exceed the file format");
  const std::size_t total = spec.classes.size() * spec.snr_db.size() * spec.frames_per_stratum;
  if (total > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("dataset: too many frames");
  if (spec.drift && !(spec.drift_rho >= 0.0 && spec.drift_rho <= 1.0))
    throw ConfigError("dataset: drift correlation must lie in [0, 1]");
}

void store(const IqBuffer& buf, std::vector<float>& out) {
  out.resize(buf.samples.size() * 2);
  for (std::size_t k = 0; k < buf.samples.size(); ++k) {
    out[2 * k] = static_cast<float>(buf.samples[k].real());
    out[2 * k + 1] = static_cast<float>(buf.samples[k].imag());
  }
}

SignalFrame synthesize(const DatasetSpec& spec, const Constellation& c, std::uint16_t label, double snr_db,
                       std::uint64_t index) {
  Rng rng(derive_seed(spec.seed, index));
  ChannelRealization channel = draw_channel(spec.nt, spec.nr, rng);
  channel.seed = spec.seed;
  channel.frame_index = index;

  IqBuffer s(spec.nt, spec.length);
  std::vector<std::uint8_t> bits(spec.length * c.bits_per_symbol());
  for (std::size_t i = 0; i < spec.nt; ++i) {
    for (auto& b : bits) b = rng.bit() ? 1 : 0;
    const auto symbols = modulate(bits, c);
    std::copy(symbols.begin(), symbols.end(), s.samples.begin() + static_cast<std::ptrdiff_t>(i * spec.length));
  }

  IqBuffer r;
  if (!spec.drift) {
    r = apply_channel(channel, s);
  } else {
    r = IqBuffer(spec.nr, spec.length);
    IqBuffer slot(spec.nt, 1);
    for (std::size_t t = 0; t < spec.length; ++t) {
      if (t > 0) drift_channel(channel, spec.drift_rho, rng);
      for (std::size_t i = 0; i < spec.nt; ++i) slot.at(i, 0) = s.at(i, t);
      const IqBuffer out = apply_channel(channel, slot);
      for (std::size_t j = 0; j < spec.nr; ++j) r.at(j, t) = out.at(j, 0);
    }
  }
  add_awgn(r, snr_db, rng);

  SignalFrame frame;
  frame.label = label;
  frame.snr_db = static_cast<float>(snr_db);
  store(r, frame.iq);
  if (spec.keep_clean) store(s, frame.clean);
  return frame;
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
  check_spec(spec);
  std::vector<Constellation> alphabets;
  Dataset d;
  for (const auto& name : spec.classes) {
    const auto mc = parse_modulation(name);
    alphabets.push_back(make_constellation(mc.scheme, mc.order));
    d.class_names.push_back(mc.name);
  }
  d.nr = static_cast<std::uint16_t>(spec.nr);
  d.nt = static_cast<std::uint16_t>(spec.nt);
  d.length = static_cast<std::uint32_t>(spec.length);
  d.has_clean = spec.keep_clean;

  const std::size_t n_snr = spec.snr_db.size();
  const std::size_t per = spec.frames_per_stratum;
  d.frames.resize(spec.classes.size() * n_snr * per);
  parallel_for(d.frames.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      const std::size_t cls = n / (n_snr * per);
      const std::size_t snr = (n / per) % n_snr;
      d.frames[n] = synthesize(spec, alphabets[cls], static_cast<std::uint16_t>(cls), spec.snr_db[snr], n);
    }
  });
  return d;
}

}  // namespace camd::sig
