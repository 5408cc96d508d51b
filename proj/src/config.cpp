#include "moeforge/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "moeforge/errors.hpp"
#include "moeforge/evaluator.hpp"
#include "moeforge/tensor_io.hpp"

namespace moeforge {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("config: invalid value '" + v + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: invalid boolean '" + v + "' for " + key);
}

struct Binding {
  std::function<void(CliConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const CliConfig&)> get;
};

#define MF_INT(expr)                                                                  \
  Binding {                                                                           \
    [](CliConfig& c, const std::string& k, const std::string& v) {                    \
      expr = parse_number<std::remove_reference_t<decltype(expr)>>(k, v);             \
    },                                                                                \
        [](const CliConfig& c) { return std::to_string(expr); }                       \
  }
#define MF_REAL(expr)                                                                 \
  Binding {                                                                           \
    [](CliConfig& c, const std::string& k, const std::string& v) {                    \
      expr = parse_number<double>(k, v);                                              \
    },                                                                                \
        [](const CliConfig& c) { return format_real(expr); }                          \
  }
#define MF_BOOL(expr)                                                                 \
  Binding {                                                                           \
    [](CliConfig& c, const std::string& k, const std::string& v) {                    \
      expr = parse_bool(k, v);                                                        \
    },                                                                                \
        [](const CliConfig& c) { return std::string((expr) ? "true" : "false"); }     \
  }

using Table = std::map<std::string, std::map<std::string, Binding>>;

const Table& bindings() {
  static const Table table = {
      {"run", {{"seed", MF_INT(c.seed)}}},
      {"suite",
       {{"tasks", MF_INT(c.suite.tasks)},
        {"input_dim", MF_INT(c.suite.input_dim)},
        {"class_pool", MF_INT(c.suite.class_pool)},
        {"classes_per_task", MF_INT(c.suite.classes_per_task)},
        {"separation", MF_REAL(c.suite.separation)},
        {"overlap", MF_REAL(c.suite.overlap)},
        {"noise", MF_REAL(c.suite.noise)},
        {"shift_scale", MF_REAL(c.suite.shift_scale)},
        {"train_per_class", MF_INT(c.suite.train_per_class)},
        {"test_per_class", MF_INT(c.suite.test_per_class)},
        {"identical_transforms", MF_BOOL(c.suite.identical_transforms)}}},
      {"train",
       {{"experts", MF_INT(c.train.num_experts)},
        {"topk", MF_INT(c.train.top_k)},
        {"batch", MF_INT(c.train.batch)},
        {"iterations", MF_INT(c.train.iterations)},
        {"lr", MF_REAL(c.train.lr)},
        {"weight_decay", MF_REAL(c.train.weight_decay)},
        {"smoothing", MF_REAL(c.train.smoothing)},
        {"temperature", MF_REAL(c.train.temperature)},
        {"dim", MF_INT(c.train.dim)},
        {"hidden", MF_INT(c.train.hidden)},
        {"rank", MF_INT(c.train.rank)},
        {"depth", MF_INT(c.train.depth)},
        {"train_backbone_first_task", MF_BOOL(c.train.train_backbone_first_task)}}},
      {"merge", {{"cycle", MF_INT(c.train.merge_cycle)}, {"enabled", MF_BOOL(c.train.merge_enabled)}}},
      {"autoencoder",
       {{"bottleneck", MF_INT(c.train.autoencoder.bottleneck)},
        {"epochs", MF_INT(c.train.autoencoder.epochs)},
        {"lr", MF_REAL(c.train.autoencoder.lr)},
        {"threshold_percentile", MF_REAL(c.train.autoencoder.threshold_percentile)}}},
      {"output",
       {{"dir",
         Binding{[](CliConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
                 [](const CliConfig& c) { return c.out_dir.generic_string(); }}}}},
  };
  return table;
}

#undef MF_INT
#undef MF_REAL
#undef MF_BOOL

}  // namespace

void CliConfig::propagate_seed() {
  suite.seed = seed;
  train.seed = seed;
}

void apply_setting(CliConfig& cfg, const std::string& section, const std::string& key,
                   const std::string& value) {
  const auto& table = bindings();
  auto s = table.find(section);
  if (s == table.end()) throw ConfigError("config: unknown section [" + section + "]");
  auto k = s->second.find(key);
  if (k == s->second.end()) throw ConfigError("config: unknown key " + section + "." + key);
  k->second.set(cfg, section + "." + key, value);
  cfg.propagate_seed();
}

void apply_config_text(CliConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (bindings().count(section) == 0) {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": setting outside a section");
    try {
      apply_setting(cfg, section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void apply_config_file(CliConfig& cfg, const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  apply_config_text(cfg, text, path.string());
}

std::string render_config(const CliConfig& cfg) {
  static const char* kOrder[] = {"run", "suite", "train", "merge", "autoencoder", "output"};
  std::ostringstream os;
  os << "# resolved moeforge configuration\n";
  for (const char* section : kOrder) {
    os << "\n[" << section << "]\n";
    for (const auto& [key, b] : bindings().at(section)) os << key << " = " << b.get(cfg) << '\n';
  }
  return os.str();
}

}  // namespace moeforge
