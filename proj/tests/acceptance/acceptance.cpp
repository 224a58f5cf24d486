// Acceptance checks 1-9. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "camd/common/binio.h"
#include "camd/common/error.h"
#include "camd/common/rng.h"
#include "camd/diffcore/ops.h"
#include "camd/model/checkpoint.h"
#include "camd/model/gradcheck_suite.h"
#include "camd/sigsynth/channel.h"
#include "camd/sigsynth/constellation.h"
#include "camd/sigsynth/dataset.h"
#include "camd/train/evaluate.h"
#include "camd/train/split.h"
#include "camd/train/trainer.h"
#include "oracles.h"
#include "scenarios.h"
#include "test_util.h"

using namespace camd;
using namespace camd::testing;
using diff::Shape;
using model::Camd;
using model::Variant;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Runs one criterion; an escaping exception counts as a failure.
void run(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

// ---- 1 -------------------------------------------------------------------------------

void gradient_fidelity() {
  const auto t0 = Clock::now();
  const auto rows = model::full_gradcheck_suite();
  const double secs = seconds_since(t0);
  double worst_op = 0, worst_e2e = 0;
  std::string failed;
  for (const auto& r : rows) {
    (r.tolerance == model::kOpTolerance ? worst_op : worst_e2e) =
        std::max(r.tolerance == model::kOpTolerance ? worst_op : worst_e2e, r.max_relative_error);
    if (!r.passed()) failed += " " + r.name;
  }
  report(1, failed.empty() && secs < 120.0,
         fmt("%zu checks, worst op %.2e (tol 1e-4), worst end-to-end %.2e (tol 1e-3), %.1fs%s", rows.size(), worst_op,
             worst_e2e, secs, failed.empty() ? "" : (" failed:" + failed).c_str()));
}

// ---- 2 -------------------------------------------------------------------------------

void compensation_oracle() {
  Rng rng(2024);
  const std::size_t nt = 2, nr = 2, L = 64;
  const auto qam = sig::make_constellation(sig::Scheme::qam, 16);
  int ok = 0, frames = 0;
  double worst = 0;
  while (frames < 1000) {
    const auto ch = sig::draw_channel(nt, nr, rng);
    CMat H(nr, std::vector<cplx>(nt));
    for (std::size_t j = 0; j < nr; ++j)
      for (std::size_t i = 0; i < nt; ++i) H[j][i] = ch.h(j, i);
    if (condition_2col(H) >= 10) continue;
    ++frames;

    sig::IqBuffer s(nt, L);
    for (std::size_t i = 0; i < nt; ++i) {
      std::vector<std::uint8_t> bits(L * 4);
      for (auto& b : bits) b = rng.bit();
      const auto sym = sig::modulate(bits, qam);
      for (std::size_t t = 0; t < L; ++t) s.at(i, t) = sym[t];
    }
    const auto r = sig::apply_channel(ch, s);
    const CMat P = pinv(H);

    TensorD rt(Shape{1, nr, L, 2}), h(Shape{1, nr, nt, L, 2});
    for (std::size_t j = 0; j < nr; ++j) {
      for (std::size_t t = 0; t < L; ++t) {
        rt.data()[(j * L + t) * 2] = r.at(j, t).real();
        rt.data()[(j * L + t) * 2 + 1] = r.at(j, t).imag();
        for (std::size_t i = 0; i < nt; ++i) {
          h.data()[((j * nt + i) * L + t) * 2] = P[i][j].real();
          h.data()[((j * nt + i) * L + t) * 2 + 1] = P[i][j].imag();
        }
      }
    }
    const auto rec = model::cc_apply(h, rt);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t t = 0; t < L; ++t) {
        const cplx got(rec.data()[(i * L + t) * 2], rec.data()[(i * L + t) * 2 + 1]);
        num += std::norm(got - s.at(i, t));
        den += std::norm(s.at(i, t));
      }
    }
    const double rel = std::sqrt(num / den);
    worst = std::max(worst, rel);
    ok += rel <= 1e-5;
  }
  report(2, ok >= 999, fmt("%d/1000 frames recovered within 1e-5 (worst %.2e)", ok, worst));
}

// ---- 3 -------------------------------------------------------------------------------

void shapes_and_normalization() {
  std::vector<std::string> bad;

  auto cfg = small_config();
  cfg.length = 256;
  cfg.K_c = 2;
  Camd<double> m(cfg, 1);
  const auto e = model::embed(random_tensor(Shape{1, 2, 256, 2}, 3), m.main_extractor().embed, cfg.kernel);
  const std::size_t le = e.dim(2);
  if (le != 64 || cfg.embedded_length() != 64) bad.push_back("L_e=" + std::to_string(le));

  double softmax_err = 0, attention_err = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = diff::softmax(random_tensor<float>(Shape{16, 7}, seed, -20, 20));
    for (std::size_t r = 0; r < 16; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 7; ++c) s += p.data()[r * 7 + c];
      softmax_err = std::max(softmax_err, std::abs(s - 1.0));
    }
    const auto w = diff::attention_weights(random_tensor<float>(Shape{2, 4, 8, 16}, seed, -4, 4),
                                           random_tensor<float>(Shape{2, 4, 8, 16}, seed + 50, -4, 4), 4);
    for (std::size_t r = 0; r < w.numel() / 4; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 4; ++c) s += w.data()[r * 4 + c];
      attention_err = std::max(attention_err, std::abs(s - 1.0));
    }
  }
  if (softmax_err > 1e-6) bad.push_back("softmax");
  if (attention_err > 1e-6) bad.push_back("attention");

  double loss_err = 0;
  for (std::size_t k : {2u, 5u, 11u, 30u}) {
    const std::vector<int> labels{0, static_cast<int>(k - 1), static_cast<int>(k / 2)};
    const auto loss = diff::cross_entropy(TensorD(Shape{3, k}), std::span<const int>(labels));
    loss_err = std::max(loss_err, std::abs(loss.item() - std::log(static_cast<double>(k))));
  }
  if (loss_err > 1e-12) bad.push_back("uniform loss");

  std::string detail = fmt("L_e=%zu, softmax dev %.1e, attention dev %.1e, ln K dev %.1e", le, softmax_err,
                           attention_err, loss_err);
  report(3, bad.empty(), detail);
}

// ---- 4 -------------------------------------------------------------------------------

void symmetry() {
  double logits = 0, emb = 0, block = 0;
  for (std::size_t A : {2u, 4u}) {
    Camd<double> m(small_config(Variant::no_cc, A), 40 + A);
    const auto x = random_tensor(Shape{2, A, 32, 2}, 41);
    const auto ref = m.forward(x);
    const auto& ex = m.main_extractor();
    const auto ey = model::embed(x, ex.embed, 3);
    const auto feats = random_tensor(Shape{2, A, 8, 16}, 42);
    const auto by = model::antenna_block(feats, ex.blocks[0], ex.heads);
    for (const auto& perm : all_permutations(A)) {
      logits = std::max(logits, max_abs_diff(m.forward(permute_antennas(x, perm)), ref));
      emb = std::max(emb, max_abs_diff(model::embed(permute_antennas(x, perm), ex.embed, 3), permute_antennas(ey, perm)));
      block = std::max(block, max_abs_diff(model::antenna_block(permute_antennas(feats, perm), ex.blocks[0], ex.heads),
                                           permute_antennas(by, perm)));
    }
  }
  report(4, logits <= 1e-5 && emb <= 1e-5 && block <= 1e-5,
         fmt("Nr=2,4 all permutations: no_cc logits %.1e, embed %.1e, antenna_block %.1e (tol 1e-5)", logits, emb,
             block));
}

// ---- 5 and 6 -------------------------------------------------------------------------

// Desk benchmark: 2x2, five classes, L = 128, SNR {10, 20} dB, 10,010 training
// frames after the 6:2:2 split. Tiny model C=32, C_cc=16, two heads each,
// 10 epochs of batch 32 at lr 1e-3.
struct DeskRun {
  double acc20 = 0;
  double avg = 0;
  double seconds = 0;
};

const sig::Dataset& desk_data() {
  static const sig::Dataset d = [] {
    sig::DatasetSpec spec;
    spec.classes = {"bpsk", "qpsk", "psk8", "qam16", "qam64"};
    spec.length = 128;
    spec.snr_db = {10.0, 20.0};
    spec.frames_per_stratum = 1667;
    spec.seed = 11;
    return sig::generate_dataset(spec);
  }();
  return d;
}

train::TrainHyper desk_hyper(std::uint64_t seed) {
  train::TrainHyper h;
  h.epochs = 10;
  h.batch = 32;
  h.lr = 1e-3;
  h.weight_decay = 1e-3;
  h.seed = seed;
  return h;
}

DeskRun desk_run(Variant v, std::uint64_t seed) {
  const auto& d = desk_data();
  static const auto split = train::split_dataset(d, {.seed = 3});
  model::ModelConfig cfg;
  cfg.num_classes = 5;
  cfg.length = 128;
  cfg.C = 32;
  cfg.C_cc = 16;
  cfg.heads = 2;
  cfg.heads_cc = 2;
  cfg.K_c = 1;  // L_e = 64; with L_e = 32 the model stalls near 45% at 20 dB
  cfg.variant = v;
  const auto h = desk_hyper(seed);
  const auto t0 = Clock::now();
  Camd<float> m(cfg, train::init_seed(h));
  train::train(m, d, split.train, split.val, h);
  const auto r = train::evaluate(m, d, split.test);
  DeskRun out;
  out.seconds = seconds_since(t0);
  out.avg = r.avg;
  for (const auto& s : r.per_snr)
    if (s.snr_db == 20.0f) out.acc20 = s.accuracy;
  std::printf("  [%s seed %llu] acc@20dB %.4f  avg %.4f  (%.0fs)\n", std::string(model::variant_name(v)).c_str(),
              static_cast<unsigned long long>(seed), out.acc20, out.avg, out.seconds);
  std::fflush(stdout);
  return out;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

void desk_learning_and_ablation() {
  const std::uint64_t seeds[] = {1, 2, 3};
  std::vector<double> full_acc20, full_avg, nocc_avg, cnn_avg;
  double full_secs = 0;
  for (auto s : seeds) {
    const auto r = desk_run(Variant::full, s);
    full_acc20.push_back(r.acc20);
    full_avg.push_back(r.avg);
    full_secs += r.seconds;
  }
  const double med20 = median3(full_acc20);
  report(5, med20 >= 0.60 && full_secs < 1800.0,
         fmt("full variant median test accuracy at 20 dB %.4f (threshold 0.60, chance 0.20); 3 runs in %.0fs", med20,
             full_secs));

  for (auto s : seeds) nocc_avg.push_back(desk_run(Variant::no_cc, s).avg);
  for (auto s : seeds) cnn_avg.push_back(desk_run(Variant::cnn_only, s).avg);
  const double f = median3(full_avg), n = median3(nocc_avg), c = median3(cnn_avg);
  report(6, f >= c && f >= n - 0.01,
         fmt("median avg accuracy: full %.4f, no_cc %.4f, cnn_only %.4f (need full >= cnn_only and >= no_cc - 0.01)", f,
             n, c));
}

// ---- 7 -------------------------------------------------------------------------------

template <typename E>
bool throws_as(const std::function<void()>& f) {
  try {
    f();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

void determinism_and_formats() {
  std::vector<std::string> bad;
  sig::DatasetSpec spec;
  spec.classes = {"bpsk", "qam16", "apsk16"};
  spec.length = 32;
  spec.snr_db = {0.0, 10.0};
  spec.frames_per_stratum = 10;
  spec.seed = 77;
  spec.keep_clean = true;
  const auto a = sig::serialize_dataset(sig::generate_dataset(spec));
  const auto b = sig::serialize_dataset(sig::generate_dataset(spec));
  if (a != b) bad.push_back("dataset bytes differ");
  if (sig::serialize_dataset(sig::deserialize_dataset(a)) != a) bad.push_back("dataset round trip");

  const auto d = sig::deserialize_dataset(a);
  auto train_once = [&] {
    model::ModelConfig cfg = model::tiny_config();
    cfg.length = 32;
    train::TrainHyper h;
    h.epochs = 2;
    h.batch = 8;
    h.seed = 5;
    Camd<float> m(cfg, train::init_seed(h));
    const auto idx = train::all_indices(d);
    train::train(m, d, idx, {}, h);
    return model::serialize_checkpoint(m);
  };
  const auto c1 = train_once();
  if (c1 != train_once()) bad.push_back("checkpoint bytes differ");
  if (model::serialize_checkpoint(model::deserialize_checkpoint(c1)) != c1) bad.push_back("checkpoint round trip");

  auto corrupt = [](std::vector<std::uint8_t> v, std::size_t at, std::uint8_t x) {
    v[at] ^= x;
    return v;
  };
  auto truncated = [](std::vector<std::uint8_t> v) {
    v.resize(v.size() - 3);
    return v;
  };
  if (!throws_as<MagicError>([&] { sig::deserialize_dataset(corrupt(a, 0, 0xff)); })) bad.push_back("dataset magic");
  if (!throws_as<VersionError>([&] { sig::deserialize_dataset(corrupt(a, 4, 0x02)); })) bad.push_back("dataset version");
  if (!throws_as<TruncationError>([&] { sig::deserialize_dataset(truncated(a)); })) bad.push_back("dataset truncation");
  if (!throws_as<MagicError>([&] { model::deserialize_checkpoint(corrupt(c1, 1, 0xff)); })) bad.push_back("ckpt magic");
  if (!throws_as<VersionError>([&] { model::deserialize_checkpoint(corrupt(c1, 4, 0x02)); })) bad.push_back("ckpt version");
  if (!throws_as<TruncationError>([&] { model::deserialize_checkpoint(truncated(c1)); })) bad.push_back("ckpt truncation");

  std::string detail = "dataset and checkpoint bytes reproducible, round trips exact, magic/version/truncation errors";
  for (const auto& b2 : bad) detail += " | " + b2;
  report(7, bad.empty(), detail);
}

// ---- 8 -------------------------------------------------------------------------------

void complexity() {
  std::string detail;
  bool ok = true;
  for (Variant v : model::kAllVariants) {
    auto cfg = model::reference_config();
    cfg.variant = v;
    const auto ck = model::parse_checkpoint(model::serialize_checkpoint(Camd<float>(cfg, 1)));
    std::size_t stored = 0;
    for (const auto& e : ck.entries) stored += e.data.size();
    const std::size_t counted = model::count_params(cfg);
    ok = ok && stored == counted;
    detail += fmt("%s %zu%s; ", std::string(model::variant_name(v)).c_str(), counted, stored == counted ? "" : " MISMATCH");
  }
  detail += fmt("full-size 2x2 config %.2fK params vs 211.13K reported (reference only)",
                model::count_params(model::reference_config()) / 1000.0);
  report(8, ok, detail);
}

// ---- 9 -------------------------------------------------------------------------------

void overfit() {
  const auto r = run_overfit();
  report(9, r.first_perfect_epoch > 0 && r.first_perfect_epoch <= 300 && r.seconds < 120.0,
         fmt("32 frames: 100%% train accuracy at epoch %zu (limit 300), final loss %.4f, %.1fs", r.first_perfect_epoch,
             r.final_loss, r.seconds));
}

}  // namespace

int main(int argc, char** argv) {
  // --quick skips the desk-scale training runs (criteria 5 and 6).
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  run(1, gradient_fidelity);
  run(2, compensation_oracle);
  run(3, shapes_and_normalization);
  run(4, symmetry);
  if (quick) {
    std::printf("criterion 5: SKIPPED (--quick)\ncriterion 6: SKIPPED (--quick)\n");
  } else {
    try {
      desk_learning_and_ablation();
    } catch (const std::exception& e) {
      report(5, false, std::string("exception: ") + e.what());
      report(6, false, "not run");
    }
  }
  run(7, determinism_and_formats);
  run(8, complexity);
  run(9, overfit);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
