#include "camd/sigsynth/channel.h"

#include <cmath>
#include <numbers>
#include <string>

#include "camd/common/error.h"

namespace camd::sig {

namespace {

cplx complex_normal(Rng& rng) {
  const double s = std::numbers::sqrt2 / 2.0;
  const double re = rng.normal();
  const double im = rng.normal();
  return {s * re, s * im};
}

}  // namespace

ChannelRealization draw_channel(std::size_t nt, std::size_t nr, Rng& rng) {
  if (nt < 1 || nr < nt) {
    throw DimensionError("draw_channel: need 1 <= Nt <= Nr, got Nt=" + std::to_string(nt) +
                         " Nr=" + std::to_string(nr));
  }
  ChannelRealization ch;
  ch.nr = nr;
  ch.nt = nt;
  ch.h_i.resize(nr * nt);
  ch.h_q.resize(nr * nt);
  for (std::size_t j = 0; j < nr; ++j)
    for (std::size_t i = 0; i < nt; ++i) ch.set(j, i, complex_normal(rng));
  return ch;
}

IqBuffer apply_channel(const ChannelRealization& channel, const IqBuffer& s) {
  if (s.antennas != channel.nt || s.samples.size() != s.antennas * s.length) {
    throw DimensionError("apply_channel: signal has " + std::to_string(s.antennas) + " streams, channel expects " +
                         std::to_string(channel.nt));
  }
  IqBuffer r(channel.nr, s.length);
  for (std::size_t j = 0; j < channel.nr; ++j) {
    for (std::size_t i = 0; i < channel.nt; ++i) {
      const cplx h = channel.h(j, i);
      for (std::size_t t = 0; t < s.length; ++t) r.at(j, t) += h * s.at(i, t);
    }
  }
  return r;
}

void drift_channel(ChannelRealization& channel, double rho, Rng& rng) {
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (std::size_t j = 0; j < channel.nr; ++j)
    for (std::size_t i = 0; i < channel.nt; ++i)
      channel.set(j, i, rho * channel.h(j, i) + innovation * complex_normal(rng));
}

void add_awgn(IqBuffer& r, double snr_db, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return;
  if (!std::isfinite(snr_db)) throw NumericInputError("add_awgn: SNR must be finite or +inf");
  for (std::size_t j = 0; j < r.antennas; ++j) {
    double power = 0.0;
    for (std::size_t t = 0; t < r.length; ++t) power += std::norm(r.at(j, t));
    power /= static_cast<double>(r.length);
    const double sigma = std::sqrt(power * std::pow(10.0, -snr_db / 10.0));
    for (std::size_t t = 0; t < r.length; ++t) r.at(j, t) += sigma * complex_normal(rng);
  }
}

}  // namespace camd::sig
