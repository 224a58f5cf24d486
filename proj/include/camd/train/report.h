#pragma once

#include <filesystem>
#include <string>

#include "camd/train/evaluate.h"
#include "camd/train/trainer.h"

namespace camd::train {

// "snr_db,accuracy,n", one row per non-empty SNR; every real number has six
// decimals.
std::string accuracy_csv(const EvalReport& r);

// "metric,value" rows: overall, max, avg, low (low omitted when absent), frames.
std::string summary_csv(const EvalReport& r);

// K x K counts with class names as the header row and first column.
std::string confusion_csv(const EvalReport& r, const SnrStats& s);

std::string train_log_csv(const TrainLog& log);
// One JSON object per epoch: epoch, train_loss, val_loss, val_acc, seconds.
std::string train_log_jsonl(const TrainLog& log);

// Writes accuracy.csv, summary.csv and confusion_snr_<snr>.csv into dir
// (created if missing). IoError on failure.
void write_report(const EvalReport& r, const std::filesystem::path& dir);

// train_log.csv and train_log.jsonl.
void write_train_log(const TrainLog& log, const std::filesystem::path& dir);

// SNR as used in file names: "-4", "10", "2.5".
std::string snr_tag(float snr_db);

}  // namespace camd::train
