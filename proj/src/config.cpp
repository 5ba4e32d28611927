#include "infext/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace infext {

ExperimentConfig ExperimentConfig::full() {
  ExperimentConfig c;
  c.model.sample_rate = c.data.sample_rate;
  return c;
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.model = ModelConfig::desk();
  c.train = TrainConfig::desk();
  c.data.sample_rate = c.model.sample_rate;
  c.data.duration = 1.0;
  c.data.rir_bank_size = 32;
  return c;
}

ExperimentConfig preset_config(const std::string& name) {
  if (name == "full") return ExperimentConfig::full();
  if (name == "desk") return ExperimentConfig::desk();
  throw std::invalid_argument("unknown preset '" + name + "' (expected desk or full)");
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw std::invalid_argument("invalid value '" + s + "' for key '" + key + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("invalid value '" + s + "' for key '" + key + "' (expected true/false)");
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define INFEXT_INT_FIELD(sec, key, expr)                                                     \
  Field {                                                                                    \
    sec, key, [](const ExperimentConfig& c) { return std::to_string(c.expr); },              \
        [](ExperimentConfig& c, const std::string& v) {                                      \
          c.expr = parse_number<std::decay_t<decltype(c.expr)>>(key, v);                     \
        }                                                                                    \
  }
#define INFEXT_REAL_FIELD(sec, key, expr)                                                    \
  Field {                                                                                    \
    sec, key, [](const ExperimentConfig& c) { return format_double(c.expr); },               \
        [](ExperimentConfig& c, const std::string& v) { c.expr = parse_number<double>(key, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"model", "arch", [](const ExperimentConfig& c) { return to_string(c.model.arch); },
       [](ExperimentConfig& c, const std::string& v) { c.model.arch = parse_arch(v); }},
      {"model", "fusion", [](const ExperimentConfig& c) { return to_string(c.model.fusion); },
       [](ExperimentConfig& c, const std::string& v) { c.model.fusion = parse_fusion(v); }},
      {"model", "causal",
       [](const ExperimentConfig& c) { return std::string(c.model.causal ? "true" : "false"); },
       [](ExperimentConfig& c, const std::string& v) { c.model.causal = parse_bool("causal", v); }},
      INFEXT_INT_FIELD("model", "window", model.encoder.window),
      INFEXT_INT_FIELD("model", "stride", model.encoder.stride),
      INFEXT_INT_FIELD("model", "channels", model.encoder.channels),
      INFEXT_INT_FIELD("model", "tcn_bottleneck", model.tcn.bottleneck),
      INFEXT_INT_FIELD("model", "tcn_hidden", model.tcn.hidden),
      INFEXT_INT_FIELD("model", "tcn_kernel", model.tcn.kernel),
      INFEXT_INT_FIELD("model", "tcn_blocks", model.tcn.blocks),
      INFEXT_INT_FIELD("model", "tcn_repeats", model.tcn.repeats),
      INFEXT_INT_FIELD("model", "dprnn_bottleneck", model.dprnn.bottleneck),
      INFEXT_INT_FIELD("model", "dprnn_chunk", model.dprnn.chunk),
      INFEXT_INT_FIELD("model", "dprnn_hidden", model.dprnn.hidden),
      INFEXT_INT_FIELD("model", "dprnn_blocks", model.dprnn.blocks),
      INFEXT_INT_FIELD("model", "init_seed", init_seed),
      INFEXT_REAL_FIELD("train", "learning_rate", train.lr),
      INFEXT_REAL_FIELD("train", "weight_decay", train.weight_decay),
      INFEXT_REAL_FIELD("train", "clip_norm", train.clip_norm),
      INFEXT_INT_FIELD("train", "batch", train.batch),
      INFEXT_INT_FIELD("train", "max_epochs", train.max_epochs),
      INFEXT_INT_FIELD("train", "train_per_epoch", train.train_per_epoch),
      INFEXT_INT_FIELD("train", "val_per_epoch", train.val_per_epoch),
      INFEXT_INT_FIELD("train", "plateau_patience", train.plateau_patience),
      INFEXT_REAL_FIELD("train", "plateau_factor", train.plateau_factor),
      INFEXT_INT_FIELD("train", "early_stop_patience", train.early_stop_patience),
      INFEXT_INT_FIELD("train", "seed", train.seed),
      INFEXT_INT_FIELD("data", "sample_rate", data.sample_rate),
      INFEXT_REAL_FIELD("data", "duration", data.duration),
      INFEXT_REAL_FIELD("data", "sir_min", data.sir_min),
      INFEXT_REAL_FIELD("data", "sir_max", data.sir_max),
      INFEXT_INT_FIELD("data", "sources_per_class", data.sources_per_class),
      INFEXT_INT_FIELD("data", "rir_bank_size", data.rir_bank_size),
      INFEXT_INT_FIELD("data", "seed", data.seed),
      INFEXT_REAL_FIELD("data", "sound_speed", data.sound_speed),
      {"paths", "out_dir", [](const ExperimentConfig& c) { return c.paths.out_dir; },
       [](ExperimentConfig& c, const std::string& v) { c.paths.out_dir = v; }},
      {"paths", "source_dir", [](const ExperimentConfig& c) { return c.paths.source_dir; },
       [](ExperimentConfig& c, const std::string& v) { c.paths.source_dir = v; }},
      {"paths", "resume", [](const ExperimentConfig& c) { return c.paths.resume; },
       [](ExperimentConfig& c, const std::string& v) { c.paths.resume = v; }},
  };
  return table;
}

#undef INFEXT_INT_FIELD
#undef INFEXT_REAL_FIELD

constexpr const char* kSections[] = {"model", "train", "data", "paths"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check(const ExperimentConfig& c) {
  c.model.validate();
  c.train.validate();
  if (c.data.sample_rate <= 0) throw std::invalid_argument("data: sample_rate must be positive");
  if (!(c.data.duration > 0)) throw std::invalid_argument("data: duration must be positive");
  if (c.data.sir_min > c.data.sir_max) throw std::invalid_argument("data: sir_min exceeds sir_max");
  if (c.data.sources_per_class < 1) throw std::invalid_argument("data: sources_per_class must be >= 1");
  if (c.data.rir_bank_size < 0) throw std::invalid_argument("data: rir_bank_size must be >= 0");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw std::invalid_argument(where + "malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const char* s : kSections) known = known || section == s;
      if (!known) throw std::invalid_argument(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
    if (section.empty()) throw std::invalid_argument(where + "key outside of a section");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (section == f.section && key == f.key) field = &f;
    }
    if (field == nullptr) {
      throw std::invalid_argument(where + "unknown key '" + key + "' in [" + section + "]");
    }
    field->set(cfg, value);
  }
  cfg.model.sample_rate = cfg.data.sample_rate;
  check(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), base);
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const char* s : kSections) {
    if (!out.empty()) out += '\n';
    out += std::string("[") + s + "]\n";
    for (const auto& f : fields()) {
      if (std::string(f.section) == s) out += std::string(f.key) + " = " + f.get(cfg) + '\n';
    }
  }
  return out;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) { return fnv1a_hex(emit_config(cfg)); }

}  // namespace infext
