#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "camd/common/rng.h"

namespace camd::sig {

using cplx = std::complex<double>;

// Complex signal block, antenna-major then time: at(a, t).
struct IqBuffer {
  std::size_t antennas = 0;
  std::size_t length = 0;
  std::vector<cplx> samples;

  IqBuffer() = default;
  IqBuffer(std::size_t a, std::size_t l) : antennas(a), length(l), samples(a * l) {}

  cplx& at(std::size_t a, std::size_t t) { return samples[a * length + t]; }
  const cplx& at(std::size_t a, std::size_t t) const { return samples[a * length + t]; }
};

// Flat Nr x Nt channel; h(j, i) couples transmit antenna i into receive antenna j.
struct ChannelRealization {
  std::size_t nr = 0;
  std::size_t nt = 0;
  std::vector<double> h_i;  // [Nr x Nt]
  std::vector<double> h_q;
  std::uint64_t seed = 0;
  std::uint64_t frame_index = 0;

  cplx h(std::size_t j, std::size_t i) const { return {h_i[j * nt + i], h_q[j * nt + i]}; }
  void set(std::size_t j, std::size_t i, cplx v) {
    h_i[j * nt + i] = v.real();
    h_q[j * nt + i] = v.imag();
  }
};

// Entries i.i.d. CN(0, 1). Requires 1 <= nt <= nr.
ChannelRealization draw_channel(std::size_t nt, std::size_t nr, Rng& rng);

// r_j[t] = sum_i h(j, i) s_i[t] for every time slot.
IqBuffer apply_channel(const ChannelRealization& channel, const IqBuffer& s);

// One Gauss-Markov step: h <- rho h + sqrt(1 - rho^2) w, w ~ CN(0, 1).
void drift_channel(ChannelRealization& channel, double rho, Rng& rng);

// Per receive antenna, adds complex noise of variance P * 10^(-snr_db / 10),
// P being that antenna's measured mean |r|^2. snr_db = +inf adds nothing.
void add_awgn(IqBuffer& r, double snr_db, Rng& rng);

}  // namespace camd::sig
