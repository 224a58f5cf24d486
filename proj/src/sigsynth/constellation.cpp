#include "camd/sigsynth/constellation.h"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include "camd/common/error.h"

namespace camd::sig {

namespace {

unsigned gray(unsigned k) { return k ^ (k >> 1); }

bool power_of_two(unsigned m) { return m >= 2 && std::has_single_bit(m); }

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::psk: return "PSK";
    case Scheme::qam: return "QAM";
    case Scheme::pam: return "PAM";
    case Scheme::apsk16: return "APSK";
  }
  return "?";
}

void normalize(std::vector<cplx>& pts) {
  double power = 0.0;
  for (const auto& p : pts) power += std::norm(p);
  const double s = 1.0 / std::sqrt(power / static_cast<double>(pts.size()));
  for (auto& p : pts) p *= s;
}

std::vector<cplx> psk_points(unsigned m) {
  // BPSK sits on the real axis; higher orders are rotated by pi/M so QPSK
  // lands on (+-1 +-j)/sqrt(2).
  const double offset = m >= 4 ? std::numbers::pi / m : 0.0;
  std::vector<cplx> pts(m);
  for (unsigned k = 0; k < m; ++k) pts[gray(k)] = std::polar(1.0, 2.0 * std::numbers::pi * k / m + offset);
  return pts;
}

// Gray-labelled levels -(M-1), ..., M-1, not normalized.
std::vector<double> pam_levels(unsigned m) {
  std::vector<double> lv(m);
  for (unsigned k = 0; k < m; ++k) lv[gray(k)] = 2.0 * k - (m - 1.0);
  return lv;
}

std::vector<cplx> qam_points(unsigned m) {
  const unsigned half_bits = static_cast<unsigned>(std::countr_zero(m)) / 2;
  const unsigned side = 1u << half_bits;
  const auto lv = pam_levels(side);
  std::vector<cplx> pts(m);
  for (unsigned label = 0; label < m; ++label) pts[label] = {lv[label >> half_bits], lv[label & (side - 1)]};
  return pts;
}

std::vector<cplx> apsk16_points() {
  // DVB-S2 4+12 layout, outer/inner ring ratio 2.57. Label order follows the
  // usual DVB-S2 bit mapping table.
  constexpr double pi = std::numbers::pi;
  constexpr double r1 = 1.0, r2 = 2.57;
  const double outer[12] = {pi / 4,  -pi / 4,       3 * pi / 4,    -3 * pi / 4,   pi / 12,      -pi / 12,
                            11 * pi / 12, -11 * pi / 12, 5 * pi / 12, -5 * pi / 12, 7 * pi / 12, -7 * pi / 12};
  const double inner[4] = {pi / 4, -pi / 4, 3 * pi / 4, -3 * pi / 4};
  std::vector<cplx> pts;
  for (double a : outer) pts.push_back(std::polar(r2, a));
  for (double a : inner) pts.push_back(std::polar(r1, a));
  return pts;
}

}  // namespace

unsigned Constellation::bits_per_symbol() const { return static_cast<unsigned>(std::countr_zero(order)); }

Constellation make_constellation(Scheme scheme, unsigned order) {
  const auto reject = [&] {
    throw ConfigError("unsupported constellation " + scheme_name(scheme) + "-" + std::to_string(order));
  };
  if (!power_of_two(order)) reject();
  Constellation c{scheme, order, {}};
  switch (scheme) {
    case Scheme::psk:
      c.points = psk_points(order);
      break;
    case Scheme::pam: {
      for (double v : pam_levels(order)) c.points.emplace_back(v, 0.0);
      break;
    }
    case Scheme::qam:
      if (std::countr_zero(order) % 2 != 0) reject();
      c.points = qam_points(order);
      break;
    case Scheme::apsk16:
      if (order != 16) reject();
      c.points = apsk16_points();
      break;
  }
  normalize(c.points);
  return c;
}

std::vector<cplx> modulate(std::span<const std::uint8_t> bits, const Constellation& c) {
  const unsigned k = c.bits_per_symbol();
  if (bits.size() % k != 0) {
    throw DimensionError("modulate: " + std::to_string(bits.size()) + " bits is not a multiple of " +
                         std::to_string(k));
  }
  std::vector<cplx> out(bits.size() / k);
  for (std::size_t s = 0; s < out.size(); ++s) {
    unsigned label = 0;
    for (unsigned b = 0; b < k; ++b) label = (label << 1) | (bits[s * k + b] & 1u);
    out[s] = c.points[label];
  }
  return out;
}

ModulationClass parse_modulation(std::string_view name) {
  std::string lower(name);
  for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (lower == "bpsk") return {lower, Scheme::psk, 2};
  if (lower == "qpsk") return {lower, Scheme::psk, 4};
  if (lower == "apsk16") return {lower, Scheme::apsk16, 16};

  struct Prefix {
    std::string_view text;
    Scheme scheme;
  };
  for (const Prefix p : {Prefix{"psk", Scheme::psk}, Prefix{"qam", Scheme::qam}, Prefix{"pam", Scheme::pam}}) {
    if (lower.size() <= p.text.size() || lower.compare(0, p.text.size(), p.text) != 0) continue;
    unsigned order = 0;
    const char* first = lower.data() + p.text.size();
    const char* last = lower.data() + lower.size();
    const auto [end, ec] = std::from_chars(first, last, order);
    if (ec != std::errc{} || end != last) break;
    make_constellation(p.scheme, order);  // validates the order
    return {lower, p.scheme, order};
  }
  throw ConfigError("unknown modulation class '" + std::string(name) + "'");
}

}  // namespace camd::sig
