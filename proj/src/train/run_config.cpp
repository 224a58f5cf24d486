#include "camd/train/run_config.h"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "camd/common/binio.h"
#include "camd/common/error.h"
#include "camd/common/rng.h"
#include "camd/sigsynth/constellation.h"

namespace camd::train {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key + ": '" + v + "' is not a number");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || v[0] == '+' || *end != '\0' || errno == ERANGE)
    throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
  return x;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean (true/false)");
}

std::string num(double v) {
  char buf[64];
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  // Shortest form that reads back exactly.
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
  return out;
}

struct Key {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_KEY(name, field) \
  {name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_size(k, v); }, \
          [](const RunConfig& c) { return std::to_string(c.field); }}}
#define DOUBLE_KEY(name, field) \
  {name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_double(k, v); }, \
          [](const RunConfig& c) { return num(c.field); }}}
#define SEED_KEY(name, field) \
  {name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_u64(k, v); }, \
          [](const RunConfig& c) { return std::to_string(c.field); }}}
#define BOOL_KEY(name, field) \
  {name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_bool(k, v); }, \
          [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}}

// Ordered: this is also the layout of the resolved snapshot.
const std::vector<std::pair<std::string, Key>>& table() {
  static const std::vector<std::pair<std::string, Key>> t = {
      SEED_KEY("seed", seed),
      {"data.classes",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          auto names = split_commas(v);
          if (names.empty() || (names.size() == 1 && names[0].empty())) throw ConfigError(k + ": empty class list");
          for (const auto& n : names) sig::parse_modulation(n);
          c.data.classes = names;
        },
        [](const RunConfig& c) { return join(c.data.classes); }}},
      SIZE_KEY("data.nt", data.nt),
      SIZE_KEY("data.nr", data.nr),
      SIZE_KEY("data.length", data.length),
      {"data.snr_list",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.data.snr_db = parse_snr_list(v); },
        [](const RunConfig& c) {
          std::vector<std::string> xs;
          for (double s : c.data.snr_db) xs.push_back(num(s));
          return join(xs);
        }}},
      SIZE_KEY("data.frames", data.frames_per_stratum),
      SEED_KEY("data.seed", data.seed),
      BOOL_KEY("data.keep_clean", data.keep_clean),
      BOOL_KEY("data.drift", data.drift),
      DOUBLE_KEY("data.drift_rho", data.drift_rho),
      DOUBLE_KEY("split.train", split.train),
      DOUBLE_KEY("split.val", split.val),
      DOUBLE_KEY("split.test", split.test),
      SEED_KEY("split.seed", split.seed),
      {"model.variant",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.model.variant = model::parse_variant(v); },
        [](const RunConfig& c) { return std::string(model::variant_name(c.model.variant)); }}},
      SIZE_KEY("model.num_classes", model.num_classes),
      SIZE_KEY("model.nt", model.nt),
      SIZE_KEY("model.nr", model.nr),
      SIZE_KEY("model.length", model.length),
      SIZE_KEY("model.C", model.C),
      SIZE_KEY("model.C_cc", model.C_cc),
      SIZE_KEY("model.K_c", model.K_c),
      SIZE_KEY("model.K_t", model.K_t),
      SIZE_KEY("model.K_l", model.K_l),
      SIZE_KEY("model.heads", model.heads),
      SIZE_KEY("model.heads_cc", model.heads_cc),
      SIZE_KEY("model.ffn_mult", model.ffn_mult),
      SIZE_KEY("model.kernel", model.kernel),
      DOUBLE_KEY("train.lr", train.lr),
      DOUBLE_KEY("train.wd", train.weight_decay),
      SIZE_KEY("train.batch", train.batch),
      SIZE_KEY("train.epochs", train.epochs),
      SEED_KEY("train.seed", train.seed),
      SIZE_KEY("train.eval_batch", train.eval_batch),
      {"eval.low_snr",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.low_snr_db = static_cast<float>(to_double(k, v)); },
        [](const RunConfig& c) { return num(c.low_snr_db); }}},
  };
  return t;
}

#undef SIZE_KEY
#undef DOUBLE_KEY
#undef SEED_KEY
#undef BOOL_KEY

const Key* lookup(const std::string& key) {
  for (const auto& [name, k] : table())
    if (name == key) return &k;
  return nullptr;
}

}  // namespace

std::vector<double> parse_snr_list(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("SNR list is empty");
  std::vector<double> out;
  if (t.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(t);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    if (parts.size() != 3) throw ConfigError("SNR range '" + t + "' must be start:step:stop");
    const double a = to_double("SNR range", parts[0]);
    const double step = to_double("SNR range", parts[1]);
    const double b = to_double("SNR range", parts[2]);
    if (step == 0 || (b - a) / step < 0) throw ConfigError("SNR range '" + t + "' never reaches its end");
    const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    if (n > 100000) throw ConfigError("SNR range '" + t + "' is too long");
    for (std::size_t i = 0; i < n; ++i) out.push_back(a + static_cast<double>(i) * step);
  } else {
    for (const auto& s : split_commas(t)) out.push_back(to_double("SNR list", s));
  }
  for (double s : out)
    if (std::isnan(s) || s == -INFINITY) throw ConfigError("SNR list '" + t + "' has an invalid value");
  return out;
}

RunConfig::RunConfig() {
  data.classes = {"bpsk", "qpsk", "psk8", "qam16", "qam64"};
  data.snr_db = parse_snr_list("-20:2:30");
  derive_seeds();
}

void RunConfig::derive_seeds() {
  if (!is_set("data.seed")) data.seed = seed;
  if (!is_set("split.seed")) split.seed = derive_seed(seed, 1);
  if (!is_set("train.seed")) train.seed = derive_seed(seed, 2);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const Key* k = lookup(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  k->set(*this, key, trim(value));
  explicit_.insert(key);
  derive_seeds();
}

void RunConfig::parse(const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(ss, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunConfig::load(const std::filesystem::path& path) { parse(read_text_file(path), path.string()); }

std::string RunConfig::resolved_text() const {
  std::string out = "# resolved configuration\n";
  for (const auto& [name, k] : table()) out += name + " = " + k.get(*this) + "\n";
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, k] : table()) v.push_back(name);
    return v;
  }();
  return names;
}

model::ModelConfig RunConfig::model_for(const sig::Dataset& d) const {
  model::ModelConfig m = model;
  auto take = [&](const char* key, std::size_t& field, std::size_t value) {
    if (is_set(key) && field != value) {
      throw ConfigError(std::string(key) + " = " + std::to_string(field) + " but the data has " + std::to_string(value));
    }
    field = value;
  };
  take("model.num_classes", m.num_classes, d.num_classes());
  take("model.nt", m.nt, d.nt);
  take("model.nr", m.nr, d.nr);
  take("model.length", m.length, d.length);
  m.validate();
  return m;
}

}  // namespace camd::train
