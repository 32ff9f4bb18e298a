#include "fewshot/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "fewshot/common/error.hpp"
#include "fewshot/common/hash.hpp"

namespace fewshot {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), value);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(key) + ": '" + std::string(text) + "' is not a valid number");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  while (!text.empty()) {
    const auto pos = text.find(sep);
    const auto part = trim(text.substr(0, pos));
    if (!part.empty()) out.emplace_back(part);
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + 1);
  }
  return out;
}

using Setter = void (*)(ExperimentConfig&, std::string_view key, std::string_view value);
using Getter = std::string (*)(const ExperimentConfig&);

struct Field {
  std::string_view key;
  bool hashed;
  Setter set;
  Getter get;
};

#define SIZE_FIELD(name, member)                                                              \
  Field {                                                                                     \
    name, true,                                                                               \
        [](ExperimentConfig& c, std::string_view k, std::string_view v) {                     \
          c.member = parse_number<std::size_t>(k, v);                                         \
        },                                                                                    \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }                    \
  }
#define REAL_FIELD(name, member)                                                                   \
  Field {                                                                                          \
    name, true,                                                                                    \
        [](ExperimentConfig& c, std::string_view k, std::string_view v) {                          \
          c.member = parse_number<double>(k, v);                                                   \
        },                                                                                         \
        [](const ExperimentConfig& c) { return format_double(c.member); }                          \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"paradigm", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) {
         c.paradigm.kind = parse_paradigm_kind(v);
       },
       [](const ExperimentConfig& c) { return to_string(c.paradigm.kind); }},
      {"head", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) {
         c.paradigm.head = parse_head_kind(v);
       },
       [](const ExperimentConfig& c) { return to_string(c.paradigm.head); }},
      SIZE_FIELD("epochs", paradigm.epochs),
      REAL_FIELD("outer_lr", paradigm.outer_lr),
      REAL_FIELD("momentum", paradigm.momentum),
      REAL_FIELD("weight_decay", paradigm.weight_decay),
      SIZE_FIELD("batch_size", paradigm.batch_size),
      SIZE_FIELD("episodes_per_epoch", paradigm.episodes_per_epoch),
      SIZE_FIELD("train_way", paradigm.train_way),
      SIZE_FIELD("train_shot", paradigm.train_shot),
      SIZE_FIELD("train_query", paradigm.train_query),
      REAL_FIELD("inner_lr", paradigm.inner_lr),
      SIZE_FIELD("inner_steps", paradigm.inner_steps),
      {"inner_subset", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) {
         c.paradigm.inner_subset = parse_inner_subset(v);
       },
       [](const ExperimentConfig& c) { return to_string(c.paradigm.inner_subset); }},
      {"second_order", true,
       [](ExperimentConfig& c, std::string_view k, std::string_view v) {
         c.paradigm.second_order = parse_bool(k, v);
       },
       [](const ExperimentConfig& c) {
         return std::string(c.paradigm.second_order ? "true" : "false");
       }},
      SIZE_FIELD("meta_batch", paradigm.meta_batch),
      {"distance", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) {
         c.paradigm.distance = parse_distance_kind(v);
       },
       [](const ExperimentConfig& c) { return to_string(c.paradigm.distance); }},
      {"backbone", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) {
         c.backbone = parse_backbone_kind(v);
       },
       [](const ExperimentConfig& c) { return to_string(c.backbone); }},
      {"input_shape", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) {
         c.input_shape = parse_image_shape(v);
       },
       [](const ExperimentConfig& c) { return to_string(c.input_shape); }},
      {"projector", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) {
         c.projector = parse_projector_flags(v, 1).flags_string();
       },
       [](const ExperimentConfig& c) { return c.projector; }},
      {"source", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) { c.source = v; },
       [](const ExperimentConfig& c) { return c.source; }},
      {"targets", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) { c.targets = split(v, ';'); },
       [](const ExperimentConfig& c) {
         std::string s;
         for (const auto& t : c.targets) s += (s.empty() ? "" : ";") + t;
         return s;
       }},
      SIZE_FIELD("eval_way", eval.way),
      SIZE_FIELD("eval_shot", eval.shot),
      SIZE_FIELD("eval_query", eval.query),
      SIZE_FIELD("eval_episodes", eval.episodes),
      {"eval_method", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) {
         c.eval.method = parse_eval_method(v);
       },
       [](const ExperimentConfig& c) { return to_string(c.eval.method); }},
      {"tune_head", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) {
         c.eval.tune.head = parse_head_kind(v);
       },
       [](const ExperimentConfig& c) { return to_string(c.eval.tune.head); }},
      REAL_FIELD("tune_lr", eval.tune.lr),
      SIZE_FIELD("tune_steps", eval.tune.steps),
      REAL_FIELD("tune_weight_decay", eval.tune.weight_decay),
      SIZE_FIELD("metrics_subsample", metrics_subsample),
      {"inter_class", true,
       [](ExperimentConfig& c, std::string_view, std::string_view v) {
         c.inter_class = parse_inter_class_distance(v);
       },
       [](const ExperimentConfig& c) { return to_string(c.inter_class); }},
      {"seed", true,
       [](ExperimentConfig& c, std::string_view k, std::string_view v) {
         c.seed = parse_number<std::uint64_t>(k, v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      {"out", false,
       [](ExperimentConfig& c, std::string_view, std::string_view v) { c.out = std::string(v); },
       [](const ExperimentConfig& c) { return c.out.string(); }},
      {"threads", false,
       [](ExperimentConfig& c, std::string_view k, std::string_view v) {
         c.threads = parse_number<std::size_t>(k, v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.threads); }},
  };
  return table;
}

#undef SIZE_FIELD
#undef REAL_FIELD

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

void reset_for_paradigm(ExperimentConfig& c, ParadigmKind kind) {
  c.paradigm = ExperimentConfig::desk_defaults(kind);
  c.eval.method = kind == ParadigmKind::metric ? EvalMethod::proto : EvalMethod::tune;
}

}  // namespace

ParadigmConfig ExperimentConfig::desk_defaults(ParadigmKind kind) {
  ParadigmConfig p = ParadigmConfig::defaults(kind);
  p.episodes_per_epoch = 100;
  return p;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError("unknown key '" + std::string(key) + "'");
  f->set(*this, key, trim(value));
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  std::vector<std::string> errors;
  std::map<std::string, std::string, std::less<>> entries;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back("line '" + std::string(line) + "': expected key = value");
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    if (!entries.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      errors.push_back("duplicate key '" + key + "'");
    }
  }

  ExperimentConfig c;
  if (auto it = entries.find("paradigm"); it != entries.end()) {
    try {
      reset_for_paradigm(c, parse_paradigm_kind(it->second));
    } catch (const ConfigError& e) {
      errors.push_back(std::string("paradigm: ") + e.what());
    }
  }
  for (const auto& [key, value] : entries) {
    if (key == "paradigm") continue;
    try {
      c.set(key, value);
    } catch (const Error& e) {
      errors.push_back(e.what());
    }
  }
  const auto v = c.violations();
  errors.insert(errors.end(), v.begin(), v.end());
  if (!errors.empty()) {
    std::string msg = "invalid experiment config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::canonical() const {
  std::vector<std::pair<std::string_view, std::string>> lines;
  for (const auto& f : fields()) {
    if (f.hashed) lines.emplace_back(f.key, f.get(*this));
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& [k, v] : lines) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

std::string ExperimentConfig::hash() const { return fnv1a64_hex(canonical()); }

std::string ExperimentConfig::to_text() const {
  std::string text = "# config_hash = " + hash() + "\n" + canonical();
  if (!out.empty()) text += "out = " + out.string() + "\n";
  if (threads != 0) text += "threads = " + std::to_string(threads) + "\n";
  return text;
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> out = paradigm.violations();
  try {
    backbone_spec().validate();
  } catch (const Error& e) {
    out.push_back(std::string("backbone: ") + e.what());
  }
  if (source.empty()) out.push_back("source dataset reference is required");
  if (eval.way < 2) out.push_back("eval_way must be >= 2");
  if (eval.shot == 0) out.push_back("eval_shot must be >= 1");
  if (eval.query == 0) out.push_back("eval_query must be >= 1");
  if (eval.episodes == 0) out.push_back("eval_episodes must be >= 1");
  if (eval.tune.steps == 0) out.push_back("tune_steps must be >= 1");
  if (!(eval.tune.lr > 0.0)) out.push_back("tune_lr must be > 0");
  if (eval.tune.weight_decay < 0.0) out.push_back("tune_weight_decay must be >= 0");
  if (metrics_subsample < 2) out.push_back("metrics_subsample must be >= 2");
  return out;
}

void ExperimentConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid experiment config:";
  for (const auto& e : v) msg += "\n  - " + e;
  throw ConfigError(msg);
}

ProjectorConfig ExperimentConfig::projector_config() const {
  return parse_projector_flags(projector, backbone_spec().feature_dim());
}

std::vector<std::string> differing_keys(const ExperimentConfig& a, const ExperimentConfig& b) {
  std::vector<std::string> out;
  for (const auto& f : fields()) {
    if (f.hashed && f.get(a) != f.get(b)) out.emplace_back(f.key);
  }
  return out;
}

std::filesystem::path run_root() {
  if (const char* env = std::getenv(kRunRootEnv); env != nullptr && *env != '\0') return env;
  return "runs";
}

}  // namespace fewshot
