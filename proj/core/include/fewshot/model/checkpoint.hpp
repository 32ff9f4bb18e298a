#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "fewshot/model/model.hpp"

namespace fewshot {

inline constexpr int kCheckpointFormatVersion = 1;

/// Fields a caller may require of a checkpoint. Unset fields are not checked.
struct CheckpointExpectation {
  std::optional<BackboneKind> backbone;
  std::optional<ImageShape> input_shape;
  std::optional<ProjectorConfig> projector;
  std::optional<std::size_t> feature_dim;
  std::optional<std::size_t> num_classes;
  std::optional<std::string> config_hash;
};

struct Checkpoint {
  ModelBundle bundle;
  std::string config_hash;
  std::string paradigm;
};

/// Writes a single JSON archive: a metadata record (format version,
/// backbone, input shape, projector flags, feature_dim, head, class count,
/// seed, epoch, paradigm), the config hash, and every named parameter and
/// running-statistic array of theta, epsilon and omega.
void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle,
                     const std::string& config_hash, const std::string& paradigm = "");

/// Throws IoError on unreadable or malformed files and ConfigError when the
/// metadata contradicts `expect`.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const CheckpointExpectation& expect = {});

}  // namespace fewshot
