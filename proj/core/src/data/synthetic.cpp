#include "fewshot/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <vector>

#include "fewshot/common/error.hpp"
#include "fewshot/common/rng.hpp"
#include "json.hpp"

namespace fewshot {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct ClassPattern {
  std::vector<double> base;
  std::vector<double> stripe_weight;
  std::vector<double> blob_color;
  double angle = 0.0;
  double frequency = 0.0;
  double blob_x = 0.0;
  double blob_y = 0.0;
  double blob_radius = 0.0;
};

ClassPattern draw_pattern(std::uint64_t seed, std::size_t channels) {
  Rng rng(seed);
  ClassPattern p;
  for (std::size_t c = 0; c < channels; ++c) {
    p.base.push_back(rng.uniform(0.25, 0.75));
    p.stripe_weight.push_back(rng.uniform(-1.0, 1.0));
    p.blob_color.push_back(rng.uniform(0.0, 1.0));
  }
  p.angle = rng.uniform(0.0, std::numbers::pi);
  p.frequency = rng.uniform(2.0, 5.0);
  p.blob_x = rng.uniform(0.3, 0.7);
  p.blob_y = rng.uniform(0.3, 0.7);
  p.blob_radius = rng.uniform(0.12, 0.25);
  return p;
}

std::vector<float> render(const ClassPattern& p, const ImageShape& shape, std::uint64_t seed) {
  Rng rng(seed);
  const double phase = rng.uniform(0.0, kTwoPi);
  const double jitter_x = rng.uniform(-0.08, 0.08);
  const double jitter_y = rng.uniform(-0.08, 0.08);
  const double contrast = rng.uniform(0.7, 1.3);
  const double brightness = rng.uniform(-0.05, 0.05);
  constexpr double kNoise = 0.04;

  const double ca = std::cos(p.angle);
  const double sa = std::sin(p.angle);
  const double cx = p.blob_x + jitter_x;
  const double cy = p.blob_y + jitter_y;
  const double inv_two_r2 = 1.0 / (2.0 * p.blob_radius * p.blob_radius);
  std::vector<float> px(shape.pixel_count());
  for (std::size_t y = 0; y < shape.height; ++y) {
    const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(shape.height);
    for (std::size_t x = 0; x < shape.width; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(shape.width);
      const double wave = std::sin(kTwoPi * p.frequency * (u * ca + v * sa) + phase);
      const double mask = std::exp(-((u - cx) * (u - cx) + (v - cy) * (v - cy)) * inv_two_r2);
      for (std::size_t c = 0; c < shape.channels; ++c) {
        const double value = p.base[c] + brightness + 0.2 * contrast * p.stripe_weight[c] * wave +
                             0.6 * (p.blob_color[c] - p.base[c]) * mask + kNoise * rng.normal();
        px[(c * shape.height + y) * shape.width + x] = static_cast<float>(value);
      }
    }
  }
  return px;
}

void gaussian_blur(std::span<float> pixels, const ImageShape& shape, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;
  const int h = static_cast<int>(shape.height);
  const int w = static_cast<int>(shape.width);
  std::vector<double> tmp(static_cast<std::size_t>(h * w));
  for (std::size_t c = 0; c < shape.channels; ++c) {
    float* plane = pixels.data() + c * shape.height * shape.width;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int sx = std::clamp(x + i, 0, w - 1);
          acc += kernel[i + radius] * plane[y * w + sx];
        }
        tmp[y * w + x] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int sy = std::clamp(y + i, 0, h - 1);
          acc += kernel[i + radius] * tmp[sy * w + x];
        }
        plane[y * w + x] = static_cast<float>(acc);
      }
    }
  }
}

void validate(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ConfigError("synthetic domain needs >= 2 classes");
  if (spec.items_per_class < 2) throw ConfigError("synthetic domain needs >= 2 items per class");
  if (spec.shape.pixel_count() == 0) throw ConfigError("synthetic image shape must be non-empty");
  if (!(spec.shift.magnitude >= 0.0)) throw ConfigError("shift magnitude must be >= 0");
  if (spec.shift.kind == ShiftKind::hue_permutation && spec.shift.magnitude > 1.0) {
    throw ConfigError("hue-like-permutation magnitude must lie in [0, 1]");
  }
}

}  // namespace

std::string to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::none: return "none";
    case ShiftKind::channel_affine: return "channel-affine";
    case ShiftKind::hue_permutation: return "hue-like-permutation";
    case ShiftKind::blur: return "blur";
  }
  return "?";
}

ShiftKind parse_shift_kind(std::string_view text) {
  if (text == "none") return ShiftKind::none;
  if (text == "channel-affine") return ShiftKind::channel_affine;
  if (text == "hue-like-permutation") return ShiftKind::hue_permutation;
  if (text == "blur") return ShiftKind::blur;
  throw ConfigError("unknown shift kind '" + std::string(text) +
                    "' (expected none, channel-affine, hue-like-permutation or blur)");
}

std::string SyntheticSpec::default_name() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "synth-s%llu-%s-%g", static_cast<unsigned long long>(base_seed),
                to_string(shift.kind).c_str(), shift.kind == ShiftKind::none ? 0.0 : shift.magnitude);
  return buf;
}

void apply_shift(std::span<float> pixels, const ImageShape& shape, const ShiftSpec& shift) {
  const double m = shift.magnitude;
  if (shift.kind == ShiftKind::none || m == 0.0) return;
  const std::size_t plane = shape.height * shape.width;
  Rng rng(derive_seed(shift.seed, to_string(shift.kind)));
  switch (shift.kind) {
    case ShiftKind::channel_affine: {
      for (std::size_t c = 0; c < shape.channels; ++c) {
        const double a = rng.uniform(-0.5, 0.5);
        const double b = rng.uniform(0.2, 0.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        for (std::size_t i = 0; i < plane; ++i) {
          float& v = pixels[c * plane + i];
          v = static_cast<float>(v * (1.0 + m * a) + m * b);
        }
      }
      break;
    }
    case ShiftKind::hue_permutation: {
      if (shape.channels < 2) break;
      const std::size_t rot = 1 + rng.below(shape.channels - 1);
      const std::vector<float> src(pixels.begin(), pixels.end());
      for (std::size_t c = 0; c < shape.channels; ++c) {
        const std::size_t from = (c + rot) % shape.channels;
        for (std::size_t i = 0; i < plane; ++i) {
          pixels[c * plane + i] =
              static_cast<float>((1.0 - m) * src[c * plane + i] + m * src[from * plane + i]);
        }
      }
      break;
    }
    case ShiftKind::blur:
      gaussian_blur(pixels, shape, 1.5 * m);
      break;
    case ShiftKind::none:
      break;
  }
}

LabeledDataset make_synthetic_domain(const SyntheticSpec& spec) {
  validate(spec);
  std::vector<std::string> class_ids;
  std::vector<std::vector<ImageRecord>> items(spec.classes);
  char buf[32];
  for (std::size_t c = 0; c < spec.classes; ++c) {
    std::snprintf(buf, sizeof buf, "class_%03zu", c);
    class_ids.emplace_back(buf);
    const auto pattern = draw_pattern(
        derive_seed(spec.base_seed, "class", {spec.distinct_classes ? c : 0}), spec.shape.channels);
    items[c].reserve(spec.items_per_class);
    for (std::size_t i = 0; i < spec.items_per_class; ++i) {
      ImageRecord rec;
      rec.pixels = render(pattern, spec.shape, derive_seed(spec.base_seed, "item", {c, i}));
      apply_shift(rec.pixels, spec.shape, spec.shift);
      rec.source = "synth:" + std::to_string(spec.base_seed) + "/" + std::to_string(c) + "/" +
                   std::to_string(i);
      items[c].push_back(std::move(rec));
    }
  }
  return LabeledDataset(spec.name.empty() ? spec.default_name() : spec.name, spec.shape,
                        std::move(class_ids), std::move(items));
}

LabeledDataset make_synthetic_domain(std::uint64_t base_seed, std::size_t classes,
                                     std::size_t items_per_class, ImageShape shape,
                                     ShiftSpec shift) {
  SyntheticSpec spec;
  spec.base_seed = base_seed;
  spec.classes = classes;
  spec.items_per_class = items_per_class;
  spec.shape = shape;
  spec.shift = shift;
  return make_synthetic_domain(spec);
}

void write_manifest(const std::filesystem::path& path, const SyntheticSpec& spec) {
  validate(spec);
  nlohmann::json doc = {
      {"format", "fewshot-synthetic-manifest"},
      {"version", 1},
      {"name", spec.name.empty() ? spec.default_name() : spec.name},
      {"base_seed", spec.base_seed},
      {"classes", spec.classes},
      {"items_per_class", spec.items_per_class},
      {"shape", to_string(spec.shape)},
      {"distinct_classes", spec.distinct_classes},
      {"shift",
       {{"kind", to_string(spec.shift.kind)},
        {"magnitude", spec.shift.magnitude},
        {"seed", spec.shift.seed}}},
  };
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
}

SyntheticSpec read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  try {
    nlohmann::json doc;
    in >> doc;
    if (doc.at("format").get<std::string>() != "fewshot-synthetic-manifest") {
      throw IoError(path.string() + " is not a synthetic dataset manifest");
    }
    SyntheticSpec spec;
    spec.name = doc.at("name").get<std::string>();
    spec.base_seed = doc.at("base_seed").get<std::uint64_t>();
    spec.classes = doc.at("classes").get<std::size_t>();
    spec.items_per_class = doc.at("items_per_class").get<std::size_t>();
    spec.shape = parse_image_shape(doc.at("shape").get<std::string>());
    spec.distinct_classes = doc.value("distinct_classes", true);
    const auto& shift = doc.at("shift");
    spec.shift.kind = parse_shift_kind(shift.at("kind").get<std::string>());
    spec.shift.magnitude = shift.at("magnitude").get<double>();
    spec.shift.seed = shift.at("seed").get<std::uint64_t>();
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest " + path.string() + " is malformed: " + e.what());
  }
}

}  // namespace fewshot
