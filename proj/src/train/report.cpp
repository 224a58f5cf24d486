#include "camd/train/report.h"

#include <cmath>
#include <cstdio>
#include <system_error>

#include "camd/common/binio.h"
#include "camd/common/error.h"
#include "json.hpp"

namespace camd::train {

namespace {

std::string fixed(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

std::string snr_tag(float snr_db) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", static_cast<double>(snr_db));
  return buf;
}

std::string accuracy_csv(const EvalReport& r) {
  std::string out = "snr_db,accuracy,n\n";
  for (const auto& s : r.per_snr) out += fixed(s.snr_db) + "," + fixed(s.accuracy) + "," + std::to_string(s.frames) + "\n";
  return out;
}

std::string summary_csv(const EvalReport& r) {
  std::string out = "metric,value\n";
  out += "overall," + fixed(r.overall) + "\n";
  out += "max," + fixed(r.max) + "\n";
  out += "avg," + fixed(r.avg) + "\n";
  if (r.low) out += "low," + fixed(*r.low) + "\n";
  out += "low_snr_db," + fixed(r.low_snr_db) + "\n";
  out += "frames," + std::to_string(r.frames) + "\n";
  return out;
}

std::string confusion_csv(const EvalReport& r, const SnrStats& s) {
  std::string out = "true\\pred";
  for (const auto& c : r.class_names) out += "," + c;
  out += "\n";
  for (std::size_t i = 0; i < s.confusion.size(); ++i) {
    out += i < r.class_names.size() ? r.class_names[i] : std::to_string(i);
    for (std::size_t n : s.confusion[i]) out += "," + std::to_string(n);
    out += "\n";
  }
  return out;
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,train_loss,val_loss,val_acc,seconds\n";
  for (const auto& e : log.epochs) {
    out += std::to_string(e.epoch) + "," + fixed(e.train_loss) + "," + fixed(e.val_loss) + "," + fixed(e.val_acc) + "," +
           fixed(e.seconds) + "\n";
  }
  return out;
}

std::string train_log_jsonl(const TrainLog& log) {
  std::string out;
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  for (const auto& e : log.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = num(e.train_loss);
    j["val_loss"] = num(e.val_loss);
    j["val_acc"] = num(e.val_acc);
    j["seconds"] = num(e.seconds);
    out += j.dump() + "\n";
  }
  return out;
}

void write_report(const EvalReport& r, const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_text_file(dir / "accuracy.csv", accuracy_csv(r));
  write_text_file(dir / "summary.csv", summary_csv(r));
  for (const auto& s : r.per_snr) write_text_file(dir / ("confusion_snr_" + snr_tag(s.snr_db) + ".csv"), confusion_csv(r, s));
}

void write_train_log(const TrainLog& log, const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_text_file(dir / "train_log.csv", train_log_csv(log));
  write_text_file(dir / "train_log.jsonl", train_log_jsonl(log));
}

}  // namespace camd::train
