#include "fewshot/harness/datasets.hpp"

#include <charconv>

#include "fewshot/common/error.hpp"
#include "fewshot/data/folder.hpp"

namespace fewshot {

namespace {

template <typename T>
T number(std::string_view key, std::string_view text) {
  T value{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), value);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw ConfigError("synthetic dataset key '" + std::string(key) + "': bad value '" +
                      std::string(text) + "'");
  }
  return value;
}

}  // namespace

SyntheticSpec parse_synth_ref(std::string_view body, const ImageShape& shape) {
  SyntheticSpec spec;
  spec.shape = shape;
  while (!body.empty()) {
    const auto comma = body.find(',');
    const auto item = body.substr(0, comma);
    body = comma == std::string_view::npos ? std::string_view{} : body.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("synthetic dataset entry '" + std::string(item) + "' is not key=value");
    }
    const auto key = item.substr(0, eq);
    const auto value = item.substr(eq + 1);
    if (key == "seed") spec.base_seed = number<std::uint64_t>(key, value);
    else if (key == "classes") spec.classes = number<std::size_t>(key, value);
    else if (key == "items") spec.items_per_class = number<std::size_t>(key, value);
    else if (key == "shape") spec.shape = parse_image_shape(value);
    else if (key == "shift") spec.shift.kind = parse_shift_kind(value);
    else if (key == "magnitude") spec.shift.magnitude = number<double>(key, value);
    else if (key == "shift_seed") spec.shift.seed = number<std::uint64_t>(key, value);
    else if (key == "distinct") spec.distinct_classes = number<int>(key, value) != 0;
    else if (key == "name") spec.name = value;
    else throw ConfigError("unknown synthetic dataset key '" + std::string(key) + "'");
  }
  return spec;
}

LabeledDataset resolve_dataset(std::string_view ref, const ImageShape& shape) {
  if (ref.empty()) throw ConfigError("empty dataset reference");
  if (ref.starts_with("synth:")) return make_synthetic_domain(parse_synth_ref(ref.substr(6), shape));
  if (ref.starts_with("manifest:")) return make_synthetic_domain(read_manifest(ref.substr(9)));
  if (ref.starts_with("folder:")) return load_folder_dataset(ref.substr(7), shape);
  if (ref.ends_with(".json")) return make_synthetic_domain(read_manifest(ref));
  return load_folder_dataset(ref, shape);
}

}  // namespace fewshot
