#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "camd/common/binio.h"
#include "camd/common/error.h"
#include "camd/model/checkpoint.h"
#include "camd/model/gradcheck_suite.h"
#include "camd/sigsynth/dataset.h"
#include "camd/train/evaluate.h"
#include "camd/train/report.h"
#include "camd/train/run_config.h"
#include "camd/train/split.h"
#include "camd/train/trainer.h"

namespace fs = std::filesystem;
using namespace camd;

namespace {

// Config sources for one command: a file, then --set pairs, then dedicated flags.
struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "config file with key = value lines");
    cmd->add_option("--set", sets, "override one key, e.g. --set model.C=32");
  }

  // Flag that writes a config key.
  void key_flag(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(flag, [this, key](const std::string& v) { flags.emplace_back(key, v); }, help);
  }

  train::RunConfig resolve() const {
    train::RunConfig c;
    if (!file.empty()) c.load(file);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      c.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : flags) c.set(k, v);
    return c;
  }
};

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void print_report(const train::EvalReport& r) {
  for (const auto& s : r.per_snr)
    std::printf("  %7s dB  acc %.4f  (n=%zu)\n", train::snr_tag(s.snr_db).c_str(), s.accuracy, s.frames);
  char low[32] = "n/a";
  if (r.low) std::snprintf(low, sizeof low, "%.4f", *r.low);
  std::printf("  max %.4f  avg %.4f  low %s  overall %.4f\n", r.max, r.avg, low, r.overall);
}

struct TrainedRun {
  model::Camd<float> model;
  train::TrainLog log;
  train::EvalReport test;
};

// Split, train, save and score one configuration into dir.
TrainedRun train_into(const train::RunConfig& base, const sig::Dataset& d, const fs::path& dir) {
  make_dirs(dir);
  train::RunConfig cfg = base;
  cfg.model = cfg.model_for(d);
  write_text_file(dir / "resolved.cfg", cfg.resolved_text());

  const auto split = train::split_dataset(d, cfg.split);
  std::printf("[%s] train %zu  val %zu  test %zu  params %zu\n", std::string(model::variant_name(cfg.model.variant)).c_str(),
              split.train.size(), split.val.size(), split.test.size(), model::count_params(cfg.model));
  model::Camd<float> m(cfg.model, train::init_seed(cfg.train));
  auto log = train::train(m, d, split.train, split.val, cfg.train, [](const train::EpochRecord& e) {
    std::printf("  epoch %3zu  train_loss %.4f  val_loss %.4f  val_acc %.4f  (%.1fs)\n", e.epoch, e.train_loss,
                e.val_loss, e.val_acc, e.seconds);
    std::fflush(stdout);
  });
  model::save_checkpoint(m, dir / "model.cmdw");
  train::write_train_log(log, dir);

  train::EvalReport test;
  if (!split.test.empty()) {
    test = train::evaluate(m, d, split.test, cfg.low_snr_db, cfg.train.eval_batch);
    train::write_report(test, dir / "test");
  }
  return {std::move(m), std::move(log), std::move(test)};
}

int cmd_gen(const ConfigFlags& flags, const std::string& out) {
  const auto cfg = flags.resolve();
  const auto d = sig::generate_dataset(cfg.data);
  sig::write_dataset(d, out);
  write_text_file(out + ".cfg", cfg.resolved_text());
  std::printf("wrote %zu frames to %s\n", d.frames.size(), out.c_str());
  return 0;
}

int cmd_train(const ConfigFlags& flags, const std::string& data, const std::string& out) {
  const auto cfg = flags.resolve();
  const auto d = sig::read_dataset(data);
  const auto run = train_into(cfg, d, out);
  std::printf("best epoch %zu (val acc %.4f); test:\n", run.log.best_epoch.value_or(0), run.log.best_val_acc);
  if (!run.test.per_snr.empty()) print_report(run.test);
  return 0;
}

int cmd_eval(const ConfigFlags& flags, const std::string& model_path, const std::string& data, const std::string& out,
             const std::string& subset) {
  const auto cfg = flags.resolve();
  const auto m = model::load_checkpoint(model_path);
  const auto d = sig::read_dataset(data);
  if (m.config().nr != d.nr || m.config().length != d.length || m.config().num_classes != d.num_classes()) {
    throw ConfigError("model expects Nr=" + std::to_string(m.config().nr) + ", L=" + std::to_string(m.config().length) +
                      ", K=" + std::to_string(m.config().num_classes) + "; the data does not match");
  }
  std::vector<std::size_t> idx;
  if (subset == "all") {
    idx = train::all_indices(d);
  } else {
    const auto s = train::split_dataset(d, cfg.split);
    idx = subset == "train" ? s.train : subset == "val" ? s.val : s.test;
  }
  const auto r = train::evaluate(m, d, idx, cfg.low_snr_db, cfg.train.eval_batch);
  train::write_report(r, out);
  write_text_file(fs::path(out) / "resolved.cfg", cfg.resolved_text());
  print_report(r);
  return 0;
}

int cmd_ablate(const ConfigFlags& flags, const std::string& data, const std::string& out,
               const std::vector<std::string>& variants) {
  const auto cfg = flags.resolve();
  const auto d = sig::read_dataset(data);
  make_dirs(out);
  write_text_file(fs::path(out) / "resolved.cfg", cfg.resolved_text());

  std::string csv = "variant,params,flops,max_acc,low_acc,avg_acc,overall_acc\n";
  auto fixed = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& name : variants) {
    train::RunConfig vc = cfg;
    vc.model.variant = model::parse_variant(name);
    const auto run = train_into(vc, d, fs::path(out) / name);
    const auto& mc = run.model.config();
    const auto& r = run.test;
    csv += name + "," + std::to_string(model::count_params(mc)) + "," + std::to_string(model::estimate_flops(mc)) + "," +
           fixed(r.max) + "," + (r.low ? fixed(*r.low) : "") + "," + fixed(r.avg) + "," + fixed(r.overall) + "\n";
  }
  write_text_file(fs::path(out) / "ablation.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  bool ok = true;
  std::printf("%-28s %12s %10s %8s %8s  %s\n", "check", "max_rel_err", "tolerance", "coords", "skipped", "status");
  for (const auto& row : model::full_gradcheck_suite(seed)) {
    std::printf("%-28s %12.3e %10.0e %8zu %8zu  %s\n", row.name.c_str(), row.max_relative_error, row.tolerance,
                row.coordinates, row.kink_skipped, row.passed() ? "PASS" : "FAIL");
    ok = ok && row.passed();
  }
  std::printf("%s\n", ok ? "all checks passed" : "some checks FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"camd: MIMO modulation recognition toolkit"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, train_flags, eval_flags, ablate_flags;
  std::string out, data, model_path, subset = "all";
  std::vector<std::string> variants = {"full", "no_cc", "transformer_only", "lstm_only", "cnn_only"};
  std::uint64_t gc_seed = 1;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_flags.attach(gen);
  gen_flags.key_flag(gen, "--classes", "data.classes", "comma-separated modulation names");
  gen_flags.key_flag(gen, "--nt", "data.nt", "transmit antennas");
  gen_flags.key_flag(gen, "--nr", "data.nr", "receive antennas");
  gen_flags.key_flag(gen, "--length", "data.length", "samples per frame");
  gen_flags.key_flag(gen, "--snr", "data.snr_list", "start:step:stop or a comma list (dB)");
  gen_flags.key_flag(gen, "--frames", "data.frames", "frames per (class, SNR)");
  gen_flags.key_flag(gen, "--seed", "seed", "master seed");
  gen_flags.key_flag(gen, "--drift", "data.drift", "per-slot channel drift (true/false)");
  gen_flags.key_flag(gen, "--keep-clean", "data.keep_clean", "store transmitted frames too (true/false)");
  gen->add_option("--out", out, "dataset file")->required();

  auto* trn = app.add_subcommand("train", "train on a 6:2:2 split of a dataset");
  train_flags.attach(trn);
  train_flags.key_flag(trn, "--variant", "model.variant", "full, no_cc, transformer_only, lstm_only or cnn_only");
  train_flags.key_flag(trn, "--epochs", "train.epochs", "epochs");
  train_flags.key_flag(trn, "--batch", "train.batch", "batch size");
  train_flags.key_flag(trn, "--lr", "train.lr", "learning rate");
  train_flags.key_flag(trn, "--seed", "seed", "master seed");
  trn->add_option("--data", data, "dataset file")->required();
  trn->add_option("--out", out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "per-SNR accuracy and confusion matrices");
  eval_flags.attach(ev);
  eval_flags.key_flag(ev, "--low-snr", "eval.low_snr", "SNR reported as low (dB)");
  eval_flags.key_flag(ev, "--seed", "seed", "master seed (selects the split)");
  ev->add_option("--model", model_path, "checkpoint")->required();
  ev->add_option("--data", data, "dataset file")->required();
  ev->add_option("--out", out, "report directory")->required();
  ev->add_option("--split", subset, "frames to score")->check(CLI::IsMember({"all", "train", "val", "test"}));

  auto* abl = app.add_subcommand("ablate", "train every variant under one seed and compare");
  ablate_flags.attach(abl);
  ablate_flags.key_flag(abl, "--epochs", "train.epochs", "epochs");
  ablate_flags.key_flag(abl, "--batch", "train.batch", "batch size");
  ablate_flags.key_flag(abl, "--lr", "train.lr", "learning rate");
  ablate_flags.key_flag(abl, "--seed", "seed", "master seed");
  abl->add_option("--data", data, "dataset file")->required();
  abl->add_option("--out", out, "output directory")->required();
  abl->add_option("--variants", variants, "subset of variants")->delimiter(',');

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every op and the whole network");
  gc->add_option("--seed", gc_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen(gen_flags, out);
    if (*trn) return cmd_train(train_flags, data, out);
    if (*ev) return cmd_eval(eval_flags, model_path, data, out, subset);
    if (*abl) return cmd_ablate(ablate_flags, data, out, variants);
    if (*gc) return cmd_gradcheck(gc_seed);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "camd: config error: %s\n", e.what());
    return 2;
  } catch (const StratumError& e) {
    std::fprintf(stderr, "camd: config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "camd: error: %s\n", e.what());
    return 1;
  }
  return 2;
}
