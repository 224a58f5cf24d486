#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace camd::sig {

using cplx = std::complex<double>;

enum class Scheme { psk, qam, pam, apsk16 };

// points[label] is the symbol carrying the log2(M)-bit label, MSB first.
// Labels are Gray-assigned so geometric neighbours differ in one bit.
struct Constellation {
  Scheme scheme = Scheme::psk;
  unsigned order = 0;
  std::vector<cplx> points;

  unsigned bits_per_symbol() const;
};

// Throws ConfigError for unsupported (scheme, M) pairs.
Constellation make_constellation(Scheme scheme, unsigned order);

// bits holds one bit per byte (0 or 1). Length must be a multiple of log2(M).
std::vector<cplx> modulate(std::span<const std::uint8_t> bits, const Constellation& c);

// Class names used on the command line and in dataset headers:
// bpsk, qpsk, psk<M>, qam<M>, pam<M>, apsk16.
struct ModulationClass {
  std::string name;
  Scheme scheme = Scheme::psk;
  unsigned order = 0;
};

ModulationClass parse_modulation(std::string_view name);

}  // namespace camd::sig
