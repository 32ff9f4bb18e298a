#include "fewshot/model/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fewshot {

using nlohmann::json;

namespace {

json group_to_json(const ParamGroup<double>& g) {
  json arr = json::array();
  for (const auto& p : g.params) {
    arr.push_back({{"name", p.name}, {"shape", p.shape}, {"data", p.value}});
  }
  return arr;
}

void fill_group(const json& arr, ParamGroup<double>& target, const std::string& where) {
  if (!arr.is_array() || arr.size() != target.params.size()) {
    throw IoError("checkpoint: group '" + where + "' has " +
                  std::to_string(arr.is_array() ? arr.size() : 0) + " arrays, expected " +
                  std::to_string(target.params.size()));
  }
  for (const auto& entry : arr) {
    const auto name = entry.at("name").get<std::string>();
    Param<double>* p = target.find(name);
    if (p == nullptr) throw IoError("checkpoint: unexpected array '" + where + "/" + name + "'");
    const auto shape = entry.at("shape").get<Dims>();
    if (shape != p->shape) {
      throw IoError("checkpoint: array '" + where + "/" + name + "' has shape " +
                    dims_to_string(shape) + ", expected " + dims_to_string(p->shape));
    }
    auto data = entry.at("data").get<std::vector<double>>();
    if (data.size() != p->value.size()) {
      throw IoError("checkpoint: array '" + where + "/" + name + "' has wrong element count");
    }
    p->value = std::move(data);
  }
}

template <typename V>
void expect_equal(const std::optional<V>& want, const V& got, const std::string& field,
                  const std::string& want_text, const std::string& got_text) {
  if (want && !(*want == got)) {
    throw ConfigError("checkpoint " + field + " is " + got_text + " but the requesting config " +
                      "expects " + want_text);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle,
                     const std::string& config_hash, const std::string& paradigm) {
  json meta = {
      {"format_version", kCheckpointFormatVersion},
      {"backbone", to_string(bundle.backbone.kind)},
      {"input_shape", to_string(bundle.backbone.input)},
      {"projector", bundle.projector.flags_string()},
      {"feature_dim", bundle.feature_dim()},
      {"head_kind", to_string(bundle.head.kind)},
      {"head_temperature", bundle.head.temperature},
      {"head_init", bundle.head.init == HeadInit::he ? "he" : "zero"},
      {"num_classes", bundle.head.num_classes},
      {"seed", bundle.seed},
      {"epoch", bundle.epoch},
      {"paradigm", paradigm},
  };
  json doc = {
      {"metadata", meta},
      {"config_hash", config_hash},
      {"theta", {{"params", group_to_json(bundle.params.theta)},
                 {"buffers", group_to_json(bundle.buffers.theta)}}},
      {"epsilon", {{"params", group_to_json(bundle.params.epsilon)},
                   {"buffers", group_to_json(bundle.buffers.epsilon)}}},
      {"omega", {{"params", group_to_json(bundle.params.omega)}}},
  };
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const CheckpointExpectation& expect) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }

  Checkpoint ck;
  try {
    const auto& meta = doc.at("metadata");
    const int version = meta.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw IoError("checkpoint format version " + std::to_string(version) + " unsupported");
    }
    ModelSpec spec;
    spec.backbone.kind = parse_backbone_kind(meta.at("backbone").get<std::string>());
    spec.backbone.input = parse_image_shape(meta.at("input_shape").get<std::string>());
    const auto feature_dim = meta.at("feature_dim").get<std::size_t>();
    if (feature_dim != spec.backbone.feature_dim()) {
      throw IoError("checkpoint feature_dim " + std::to_string(feature_dim) +
                    " inconsistent with its backbone");
    }
    spec.projector = parse_projector_flags(meta.at("projector").get<std::string>(), feature_dim);
    spec.head_kind = parse_head_kind(meta.at("head_kind").get<std::string>());
    spec.num_classes = meta.at("num_classes").get<std::size_t>();
    spec.head_init = meta.value("head_init", std::string("zero")) == "he" ? HeadInit::he : HeadInit::zero;
    const auto seed = meta.at("seed").get<std::uint64_t>();

    const std::string flags = spec.projector.flags_string();
    expect_equal(expect.backbone, spec.backbone.kind, "backbone",
                 expect.backbone ? to_string(*expect.backbone) : "", to_string(spec.backbone.kind));
    expect_equal(expect.input_shape, spec.backbone.input, "input shape",
                 expect.input_shape ? to_string(*expect.input_shape) : "",
                 to_string(spec.backbone.input));
    if (expect.projector) {
      auto want = *expect.projector;
      want.feature_dim = feature_dim;
      expect_equal(std::optional<ProjectorConfig>(want), spec.projector, "projector",
                   want.flags_string(), flags);
    }
    expect_equal(expect.feature_dim, feature_dim, "feature_dim",
                 expect.feature_dim ? std::to_string(*expect.feature_dim) : "",
                 std::to_string(feature_dim));
    expect_equal(expect.num_classes, spec.num_classes, "class count",
                 expect.num_classes ? std::to_string(*expect.num_classes) : "",
                 std::to_string(spec.num_classes));
    const auto hash = doc.at("config_hash").get<std::string>();
    expect_equal(expect.config_hash, hash, "config hash", expect.config_hash.value_or(""), hash);

    ck.bundle = create_model(spec, seed);
    ck.bundle.head.temperature = meta.value("head_temperature", kCosineTemperature);
    ck.bundle.epoch = meta.at("epoch").get<std::size_t>();
    ck.config_hash = hash;
    ck.paradigm = meta.value("paradigm", std::string());
    fill_group(doc.at("theta").at("params"), ck.bundle.params.theta, "theta");
    fill_group(doc.at("theta").at("buffers"), ck.bundle.buffers.theta, "theta.buffers");
    fill_group(doc.at("epsilon").at("params"), ck.bundle.params.epsilon, "epsilon");
    fill_group(doc.at("epsilon").at("buffers"), ck.bundle.buffers.epsilon, "epsilon.buffers");
    fill_group(doc.at("omega").at("params"), ck.bundle.params.omega, "omega");
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path.string() + " is malformed: " + e.what());
  }
  return ck;
}

}  // namespace fewshot
