#include "fewshot/paradigms/config.hpp"

#include "fewshot/common/error.hpp"

namespace fewshot {

std::string to_string(ParadigmKind k) {
  switch (k) {
    case ParadigmKind::non_episodic: return "nonepisodic";
    case ParadigmKind::meta: return "meta";
    case ParadigmKind::metric: return "metric";
  }
  return "?";
}

std::string to_string(InnerSubset s) {
  switch (s) {
    case InnerSubset::all: return "all";
    case InnerSubset::head_only: return "head_only";
    case InnerSubset::body_only: return "body_only";
  }
  return "?";
}

std::string to_string(DistanceKind d) {
  return d == DistanceKind::sq_euclidean ? "sq_euclidean" : "cosine";
}

ParadigmKind parse_paradigm_kind(std::string_view text) {
  if (text == "nonepisodic" || text == "non_episodic") return ParadigmKind::non_episodic;
  if (text == "meta") return ParadigmKind::meta;
  if (text == "metric") return ParadigmKind::metric;
  throw ConfigError("unknown paradigm '" + std::string(text) +
                    "' (expected nonepisodic, meta or metric)");
}

InnerSubset parse_inner_subset(std::string_view text) {
  if (text == "all") return InnerSubset::all;
  if (text == "head_only") return InnerSubset::head_only;
  if (text == "body_only") return InnerSubset::body_only;
  throw ConfigError("unknown inner subset '" + std::string(text) +
                    "' (expected all, head_only or body_only)");
}

DistanceKind parse_distance_kind(std::string_view text) {
  if (text == "sq_euclidean") return DistanceKind::sq_euclidean;
  if (text == "cosine") return DistanceKind::cosine;
  throw ConfigError("unknown distance '" + std::string(text) +
                    "' (expected sq_euclidean or cosine)");
}

ParadigmConfig ParadigmConfig::defaults(ParadigmKind kind) {
  ParadigmConfig c;
  c.kind = kind;
  switch (kind) {
    case ParadigmKind::non_episodic: c.outer_lr = 0.05; break;
    case ParadigmKind::meta: c.outer_lr = 0.001; break;
    case ParadigmKind::metric: c.outer_lr = 0.01; break;
  }
  return c;
}

std::vector<std::string> ParadigmConfig::violations() const {
  std::vector<std::string> out;
  if (epochs == 0) out.push_back("epochs must be >= 1");
  if (!(outer_lr > 0.0)) out.push_back("outer_lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) out.push_back("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) out.push_back("weight_decay must be >= 0");
  if (kind == ParadigmKind::non_episodic && batch_size == 0) {
    out.push_back("batch_size must be >= 1");
  }
  if (kind != ParadigmKind::non_episodic) {
    if (episodes_per_epoch == 0) out.push_back("episodes_per_epoch must be >= 1");
    if (train_way < 2) out.push_back("train_way must be >= 2");
    if (train_shot == 0) out.push_back("train_shot must be >= 1");
    if (train_query == 0) out.push_back("train_query must be >= 1");
  }
  if (kind == ParadigmKind::meta) {
    if (!(inner_lr > 0.0)) out.push_back("inner_lr must be > 0 for the meta paradigm");
    if (inner_steps == 0) out.push_back("inner_steps must be >= 1 for the meta paradigm");
    if (meta_batch == 0) out.push_back("meta_batch must be >= 1");
  }
  return out;
}

void ParadigmConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid paradigm config:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ConfigError(msg);
}

void TuneConfig::validate() const {
  if (steps == 0) throw ConfigError("tune steps must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("tune lr must be > 0");
  if (weight_decay < 0.0) throw ConfigError("tune weight_decay must be >= 0");
}

}  // namespace fewshot
