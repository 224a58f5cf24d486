#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>

#include "camd/common/binio.h"
#include "camd/common/error.h"
#include "camd/sigsynth/channel.h"
#include "camd/sigsynth/constellation.h"
#include "camd/sigsynth/dataset.h"

using namespace camd;
using namespace camd::sig;

namespace {

std::vector<Constellation> all_constellations() {
  std::vector<Constellation> out;
  for (unsigned m : {2u, 4u, 8u, 16u, 32u, 64u}) out.push_back(make_constellation(Scheme::psk, m));
  for (unsigned m : {2u, 4u, 8u, 16u}) out.push_back(make_constellation(Scheme::pam, m));
  for (unsigned m : {4u, 16u, 64u, 256u}) out.push_back(make_constellation(Scheme::qam, m));
  out.push_back(make_constellation(Scheme::apsk16, 16));
  return out;
}

std::size_t nearest(const Constellation& c, cplx z) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < c.points.size(); ++k)
    if (std::abs(z - c.points[k]) < std::abs(z - c.points[best])) best = k;
  return best;
}

IqBuffer random_signal(std::size_t a, std::size_t l, std::uint64_t seed) {
  Rng rng(seed);
  IqBuffer s(a, l);
  for (auto& v : s.samples) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return s;
}

DatasetSpec small_spec() {
  DatasetSpec spec;
  spec.classes = {"bpsk", "qpsk", "psk8", "qam16", "qam64"};
  spec.length = 32;
  spec.snr_db = {0.0, 10.0, 20.0};
  spec.frames_per_stratum = 100;
  spec.seed = 7;
  return spec;
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    setenv(name, value, 1);
  }
  ~ScopedEnv() {
    if (old_.empty()) unsetenv(name_);
    else setenv(name_, old_.c_str(), 1);
  }

 private:
  const char* name_;
  std::string old_;
};

}  // namespace

// ---- constellations ------------------------------------------------------------

TEST(ConstellationTest, Bpsk) {
  const auto c = make_constellation(Scheme::psk, 2);
  EXPECT_EQ(c.points[0], cplx(1.0, 0.0));
  EXPECT_NEAR(c.points[1].real(), -1.0, 1e-15);
  EXPECT_NEAR(c.points[1].imag(), 0.0, 1e-15);
}

TEST(ConstellationTest, QpskOnDiagonals) {
  const auto c = make_constellation(Scheme::psk, 4);
  const double s = 1.0 / std::sqrt(2.0);
  std::set<std::pair<int, int>> quadrants;
  for (const auto& p : c.points) {
    EXPECT_NEAR(std::abs(p.real()), s, 1e-15);
    EXPECT_NEAR(std::abs(p.imag()), s, 1e-15);
    quadrants.insert({p.real() > 0, p.imag() > 0});
  }
  EXPECT_EQ(quadrants.size(), 4u);
}

TEST(ConstellationTest, Qam16IsScaledGrid) {
  const auto c = make_constellation(Scheme::qam, 16);
  std::set<std::pair<long, long>> grid;
  for (const auto& p : c.points) {
    // Undo the sqrt(10) normalization; coordinates must land on {+-1, +-3}.
    const double x = p.real() * std::sqrt(10.0), y = p.imag() * std::sqrt(10.0);
    EXPECT_NEAR(x, std::round(x), 1e-12);
    EXPECT_NEAR(y, std::round(y), 1e-12);
    EXPECT_EQ(std::abs(std::lround(x)) % 2, 1);
    EXPECT_LE(std::abs(std::lround(x)), 3);
    grid.insert({std::lround(x), std::lround(y)});
  }
  EXPECT_EQ(grid.size(), 16u);
}

TEST(ConstellationTest, UnitPowerAndDistinct) {
  for (const auto& c : all_constellations()) {
    double power = 0.0;
    for (const auto& p : c.points) power += std::norm(p);
    EXPECT_NEAR(power / c.points.size(), 1.0, 1e-12) << c.order;
    ASSERT_EQ(c.points.size(), c.order);
    for (std::size_t a = 0; a < c.points.size(); ++a)
      for (std::size_t b = a + 1; b < c.points.size(); ++b) EXPECT_GT(std::abs(c.points[a] - c.points[b]), 1e-6);
  }
}

// Nearest neighbours (minimum-distance pairs) differ in exactly one label bit.
TEST(ConstellationTest, GrayNeighboursDifferInOneBit) {
  for (const auto& c : all_constellations()) {
    if (c.scheme == Scheme::apsk16) continue;
    double dmin = 1e9;
    for (std::size_t a = 0; a < c.order; ++a)
      for (std::size_t b = a + 1; b < c.order; ++b) dmin = std::min(dmin, std::abs(c.points[a] - c.points[b]));
    std::size_t pairs = 0;
    for (unsigned a = 0; a < c.order; ++a) {
      for (unsigned b = a + 1; b < c.order; ++b) {
        if (std::abs(c.points[a] - c.points[b]) > dmin * (1 + 1e-9)) continue;
        ++pairs;
        EXPECT_EQ(std::popcount(a ^ b), 1) << "order " << c.order << " labels " << a << "," << b;
      }
    }
    EXPECT_GT(pairs, 0u);
  }
}

TEST(ConstellationTest, UnsupportedPairsRejected) {
  EXPECT_THROW(make_constellation(Scheme::qam, 8), ConfigError);
  EXPECT_THROW(make_constellation(Scheme::psk, 3), ConfigError);
  EXPECT_THROW(make_constellation(Scheme::psk, 1), ConfigError);
  EXPECT_THROW(make_constellation(Scheme::apsk16, 32), ConfigError);
}

TEST(ConstellationTest, ClassNames) {
  EXPECT_EQ(parse_modulation("BPSK").order, 2u);
  EXPECT_EQ(parse_modulation("qpsk").order, 4u);
  const auto q = parse_modulation("qam64");
  EXPECT_EQ(q.scheme, Scheme::qam);
  EXPECT_EQ(q.order, 64u);
  EXPECT_EQ(parse_modulation("psk16").scheme, Scheme::psk);
  EXPECT_EQ(parse_modulation("pam4").scheme, Scheme::pam);
  EXPECT_EQ(parse_modulation("apsk16").scheme, Scheme::apsk16);
  EXPECT_THROW(parse_modulation("none"), ConfigError);
  EXPECT_THROW(parse_modulation("qam8"), ConfigError);
  EXPECT_THROW(parse_modulation("psk"), ConfigError);
  EXPECT_THROW(parse_modulation("psk8x"), ConfigError);
}

// ---- modulate --------------------------------------------------------------------

TEST(ModulateTest, ZeroBitsBpskAllPlusOne) {
  const std::vector<std::uint8_t> bits(10, 0);
  for (const auto& s : modulate(bits, make_constellation(Scheme::psk, 2))) EXPECT_EQ(s, cplx(1.0, 0.0));
}

TEST(ModulateTest, EightBitsSixteenPointsGiveTwoSymbols) {
  const std::vector<std::uint8_t> bits(8, 1);
  EXPECT_EQ(modulate(bits, make_constellation(Scheme::qam, 16)).size(), 2u);
  EXPECT_THROW(modulate(std::vector<std::uint8_t>(7, 0), make_constellation(Scheme::qam, 16)), DimensionError);
}

TEST(ModulateTest, NearestNeighbourDemapRecoversBits) {
  Rng rng(3);
  for (const auto& c : all_constellations()) {
    const unsigned k = c.bits_per_symbol();
    std::vector<std::uint8_t> bits(64 * k);
    for (auto& b : bits) b = rng.bit();
    const auto symbols = modulate(bits, c);
    for (std::size_t s = 0; s < symbols.size(); ++s) {
      const std::size_t label = nearest(c, symbols[s]);
      for (unsigned b = 0; b < k; ++b) ASSERT_EQ((label >> (k - 1 - b)) & 1u, bits[s * k + b]);
    }
  }
}

// ---- channel ---------------------------------------------------------------------

TEST(ChannelTest, MonteCarloMoments) {
  Rng rng(11);
  const std::size_t n = 100000;
  double sum_i = 0, sum_q = 0, sum_sq = 0;
  for (std::size_t d = 0; d < n; ++d) {
    const auto ch = draw_channel(1, 1, rng);
    sum_i += ch.h_i[0];
    sum_q += ch.h_q[0];
    sum_sq += ch.h_i[0] * ch.h_i[0] + ch.h_q[0] * ch.h_q[0];
  }
  const double var = sum_sq / n;
  EXPECT_GE(var, 0.95);
  EXPECT_LE(var, 1.05);
  // Each plane has variance 1/2.
  const double bound = 4.0 * std::sqrt(0.5) / std::sqrt(static_cast<double>(n));
  EXPECT_LT(std::abs(sum_i / n), bound);
  EXPECT_LT(std::abs(sum_q / n), bound);
}

TEST(ChannelTest, SameSeedSameMatrix) {
  Rng a(5), b(5);
  const auto x = draw_channel(2, 4, a), y = draw_channel(2, 4, b);
  EXPECT_EQ(x.h_i, y.h_i);
  EXPECT_EQ(x.h_q, y.h_q);
  EXPECT_EQ(x.h_i.size(), 8u);
}

TEST(ChannelTest, FewerReceiveThanTransmitRejected) {
  Rng rng(1);
  EXPECT_THROW(draw_channel(3, 2, rng), DimensionError);
  EXPECT_THROW(draw_channel(0, 2, rng), DimensionError);
}

TEST(ChannelTest, IdentityChannelIsBitwisePassThrough) {
  ChannelRealization h{2, 2, {1, 0, 0, 1}, {0, 0, 0, 0}};
  const auto s = random_signal(2, 17, 4);
  const auto r = apply_channel(h, s);
  EXPECT_EQ(r.samples, s.samples);
}

TEST(ChannelTest, TimesJRotatesIq) {
  ChannelRealization h{2, 2, {0, 0, 0, 0}, {1, 0, 0, 1}};
  const auto s = random_signal(2, 9, 5);
  const auto r = apply_channel(h, s);
  for (std::size_t k = 0; k < s.samples.size(); ++k) {
    EXPECT_EQ(r.samples[k].real(), -s.samples[k].imag());
    EXPECT_EQ(r.samples[k].imag(), s.samples[k].real());
  }
}

TEST(ChannelTest, MatchesScalarComplexOracle) {
  Rng rng(6);
  const auto h = draw_channel(2, 2, rng);
  const auto s = random_signal(2, 13, 7);
  const auto r = apply_channel(h, s);
  for (std::size_t t = 0; t < 13; ++t) {
    for (std::size_t j = 0; j < 2; ++j) {
      // Expanded real arithmetic, independent of std::complex.
      double re = 0, im = 0;
      for (std::size_t i = 0; i < 2; ++i) {
        const double hr = h.h_i[j * 2 + i], hq = h.h_q[j * 2 + i];
        const double sr = s.at(i, t).real(), sq = s.at(i, t).imag();
        re += hr * sr - hq * sq;
        im += hr * sq + hq * sr;
      }
      EXPECT_NEAR(r.at(j, t).real(), re, 1e-12);
      EXPECT_NEAR(r.at(j, t).imag(), im, 1e-12);
    }
  }
}

TEST(ChannelTest, ComplexLinear) {
  Rng rng(8);
  const auto h = draw_channel(2, 4, rng);
  const auto s1 = random_signal(2, 20, 9), s2 = random_signal(2, 20, 10);
  const cplx a(0.3, -1.2), b(-2.0, 0.5);
  IqBuffer mix(2, 20);
  for (std::size_t k = 0; k < mix.samples.size(); ++k) mix.samples[k] = a * s1.samples[k] + b * s2.samples[k];
  const auto lhs = apply_channel(h, mix);
  const auto r1 = apply_channel(h, s1), r2 = apply_channel(h, s2);
  for (std::size_t k = 0; k < lhs.samples.size(); ++k)
    EXPECT_LT(std::abs(lhs.samples[k] - (a * r1.samples[k] + b * r2.samples[k])), 1e-10);
}

TEST(ChannelTest, ShapeMismatchRejected) {
  Rng rng(1);
  const auto h = draw_channel(2, 2, rng);
  EXPECT_THROW(apply_channel(h, random_signal(3, 4, 1)), DimensionError);
}

TEST(ChannelTest, DriftKeepsUnitVariance) {
  Rng rng(12);
  double sum_sq = 0;
  const std::size_t n = 20000;
  for (std::size_t d = 0; d < n; ++d) {
    auto ch = draw_channel(1, 1, rng);
    for (int step = 0; step < 5; ++step) drift_channel(ch, 0.999, rng);
    sum_sq += std::norm(ch.h(0, 0));
  }
  EXPECT_NEAR(sum_sq / n, 1.0, 0.05);
}

// ---- AWGN --------------------------------------------------------------------------

TEST(AwgnTest, InfiniteSnrIsNoOp) {
  auto r = random_signal(2, 50, 13);
  const auto before = r.samples;
  Rng rng(1);
  add_awgn(r, std::numeric_limits<double>::infinity(), rng);
  EXPECT_EQ(r.samples, before);
}

TEST(AwgnTest, EmpiricalSnrWithinTenthOfDb) {
  for (double target : {0.0, 20.0}) {
    const std::size_t n = 1000000;
    IqBuffer r(1, n);
    Rng src(14);
    const auto qam = make_constellation(Scheme::qam, 16);
    for (auto& v : r.samples) v = 1.7 * qam.points[src.below(16)];
    const auto clean = r.samples;
    Rng rng(15);
    add_awgn(r, target, rng);
    double ps = 0, pn = 0, pi = 0, pq = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const cplx e = r.samples[k] - clean[k];
      ps += std::norm(clean[k]);
      pn += std::norm(e);
      pi += e.real() * e.real();
      pq += e.imag() * e.imag();
    }
    EXPECT_NEAR(10.0 * std::log10(ps / pn), target, 0.1);
    // Noise is split evenly between I and Q.
    EXPECT_NEAR(pi / pq, 1.0, 0.02);
  }
}

TEST(AwgnTest, SnrMeasuredPerReceiveAntenna) {
  IqBuffer r(2, 200000);
  for (std::size_t t = 0; t < r.length; ++t) {
    r.at(0, t) = {1.0, 0.0};
    r.at(1, t) = {0.0, 3.0};
  }
  const auto clean = r.samples;
  Rng rng(16);
  add_awgn(r, 10.0, rng);
  for (std::size_t j = 0; j < 2; ++j) {
    double ps = 0, pn = 0;
    for (std::size_t t = 0; t < r.length; ++t) {
      ps += std::norm(clean[j * r.length + t]);
      pn += std::norm(r.at(j, t) - clean[j * r.length + t]);
    }
    EXPECT_NEAR(10.0 * std::log10(ps / pn), 10.0, 0.1) << "antenna " << j;
  }
}

// ---- dataset -----------------------------------------------------------------------

TEST(DatasetTest, CountsAndUniformLabels) {
  const auto d = generate_dataset(small_spec());
  EXPECT_EQ(d.frames.size(), 1500u);
  EXPECT_EQ(d.num_classes(), 5u);
  std::map<int, int> hist;
  std::map<std::pair<int, float>, int> strata;
  for (const auto& f : d.frames) {
    ++hist[f.label];
    ++strata[{f.label, f.snr_db}];
    ASSERT_EQ(f.iq.size(), 2u * 32 * 2);
    for (float v : f.iq) ASSERT_TRUE(std::isfinite(v));
  }
  for (const auto& [label, n] : hist) EXPECT_EQ(n, 300) << label;
  EXPECT_EQ(strata.size(), 15u);
  for (const auto& [key, n] : strata) EXPECT_EQ(n, 100);
}

TEST(DatasetTest, ByteIdenticalAcrossRunsAndThreadCounts) {
  const auto spec = small_spec();
  const auto a = serialize_dataset(generate_dataset(spec));
  const auto b = serialize_dataset(generate_dataset(spec));
  EXPECT_EQ(a, b);
  ScopedEnv env("CAMD_THREADS", "3");
  EXPECT_EQ(serialize_dataset(generate_dataset(spec)), a);
  auto other = spec;
  other.seed = 8;
  EXPECT_NE(serialize_dataset(generate_dataset(other)), a);
}

TEST(DatasetTest, CleanSymbolsLieOnLabelledConstellation) {
  auto spec = small_spec();
  spec.keep_clean = true;
  spec.frames_per_stratum = 5;
  const auto d = generate_dataset(spec);
  ASSERT_TRUE(d.has_clean);
  for (const auto& f : d.frames) {
    const auto mc = parse_modulation(d.class_names[f.label]);
    const auto c = make_constellation(mc.scheme, mc.order);
    ASSERT_EQ(f.clean.size(), 2u * 32 * 2);
    for (std::size_t k = 0; k < f.clean.size() / 2; ++k) {
      const cplx z(f.clean[2 * k], f.clean[2 * k + 1]);
      EXPECT_LT(std::abs(z - c.points[nearest(c, z)]), 1e-6);
    }
  }
}

TEST(DatasetTest, EmptyClassListRejected) {
  auto spec = small_spec();
  spec.classes.clear();
  EXPECT_THROW(generate_dataset(spec), ConfigError);
  spec = small_spec();
  spec.classes = {"qam8"};
  EXPECT_THROW(generate_dataset(spec), ConfigError);
}

TEST(DatasetTest, DriftStillProducesFiniteFrames) {
  auto spec = small_spec();
  spec.drift = true;
  spec.frames_per_stratum = 3;
  const auto d = generate_dataset(spec);
  for (const auto& f : d.frames)
    for (float v : f.iq) ASSERT_TRUE(std::isfinite(v));
}

// ---- serialization -----------------------------------------------------------------

namespace {

Dataset tiny_dataset(bool clean) {
  auto spec = small_spec();
  spec.frames_per_stratum = 2;
  spec.keep_clean = clean;
  return generate_dataset(spec);
}

}  // namespace

TEST(DatasetIoTest, RoundTripIsBitwise) {
  for (bool clean : {false, true}) {
    const auto d = tiny_dataset(clean);
    const auto bytes = serialize_dataset(d);
    const auto back = deserialize_dataset(bytes);
    EXPECT_EQ(serialize_dataset(back), bytes);
    ASSERT_EQ(back.frames.size(), d.frames.size());
    for (std::size_t n = 0; n < d.frames.size(); ++n) {
      EXPECT_EQ(back.frames[n].label, d.frames[n].label);
      EXPECT_EQ(0, std::memcmp(back.frames[n].iq.data(), d.frames[n].iq.data(), d.frames[n].iq.size() * 4));
    }
    EXPECT_EQ(back.class_names, d.class_names);
  }
}

TEST(DatasetIoTest, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "camd_sigsynth_roundtrip.camd";
  const auto d = tiny_dataset(true);
  write_dataset(d, path);
  EXPECT_EQ(serialize_dataset(read_dataset(path)), serialize_dataset(d));
  EXPECT_EQ(std::filesystem::file_size(path), serialize_dataset(d).size());
  std::filesystem::remove(path);
}

TEST(DatasetIoTest, HeaderLayout) {
  const auto bytes = serialize_dataset(tiny_dataset(false));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CAMD");
  ByteReader r(bytes);
  r.get<std::uint32_t>();
  EXPECT_EQ(r.get<std::uint32_t>(), 1u);       // version
  EXPECT_EQ(r.get<std::uint32_t>(), kRngId);   // rng id
  EXPECT_EQ(r.get<std::uint32_t>(), 30u);      // frames
  EXPECT_EQ(r.get<std::uint16_t>(), 2u);       // Nr
  EXPECT_EQ(r.get<std::uint16_t>(), 2u);       // Nt
  EXPECT_EQ(r.get<std::uint32_t>(), 32u);      // L
  EXPECT_EQ(r.get<std::uint16_t>(), 5u);       // classes
  EXPECT_EQ(r.get<std::uint8_t>(), 0u);        // no clean symbols
  EXPECT_EQ(r.get_string16(), "bpsk");
}

TEST(DatasetIoTest, CorruptMagic) {
  auto bytes = serialize_dataset(tiny_dataset(false));
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_dataset(bytes), MagicError);
  EXPECT_THROW(deserialize_dataset(std::vector<std::uint8_t>{'C', 'A'}), MagicError);
}

TEST(DatasetIoTest, VersionMismatch) {
  auto bytes = serialize_dataset(tiny_dataset(false));
  bytes[4] = 2;
  EXPECT_THROW(deserialize_dataset(bytes), VersionError);
}

TEST(DatasetIoTest, TruncatedFinalFrameNamesByteCounts) {
  auto bytes = serialize_dataset(tiny_dataset(false));
  const std::size_t full = bytes.size();
  bytes.resize(full - 10);
  try {
    deserialize_dataset(bytes);
    FAIL() << "expected TruncationError";
  } catch (const TruncationError& e) {
    EXPECT_EQ(e.expected_bytes(), full);
    EXPECT_EQ(e.actual_bytes(), full - 10);
    const std::string msg = e.what();
    EXPECT_NE(msg.find(std::to_string(full)), std::string::npos);
    EXPECT_NE(msg.find(std::to_string(full - 10)), std::string::npos);
  }
  bytes.resize(20);  // inside the header
  EXPECT_THROW(deserialize_dataset(bytes), TruncationError);
}

TEST(DatasetIoTest, TrailingBytesRejected) {
  auto bytes = serialize_dataset(tiny_dataset(false));
  bytes.push_back(0);
  EXPECT_THROW(deserialize_dataset(bytes), FormatError);
}
