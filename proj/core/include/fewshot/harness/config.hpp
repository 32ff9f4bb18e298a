#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/analysis/cluster.hpp"
#include "fewshot/common/image_shape.hpp"
#include "fewshot/model/backbone.hpp"
#include "fewshot/paradigms/config.hpp"
#include "fewshot/paradigms/evaluation.hpp"

namespace fewshot {

/// Everything that determines one experiment. Serialized as flat
/// `key = value` lines; order, blank lines and `#` comments are ignored.
struct ExperimentConfig {
  ParadigmConfig paradigm = desk_defaults(ParadigmKind::non_episodic);
  BackboneKind backbone = BackboneKind::conv32f_tiny;
  ImageShape input_shape;
  std::string projector = "full";  ///< "none", "full" or a comma list

  std::string source;                ///< dataset reference, see resolve_dataset
  std::vector<std::string> targets;  ///< written as one `;`-separated value

  EvalSpec eval;
  std::size_t metrics_subsample = 2000;
  InterClassDistance inter_class = InterClassDistance::centroid;

  std::uint64_t seed = 0;
  std::filesystem::path out;  ///< run directory; not part of the hash
  std::size_t threads = 0;    ///< evaluation workers; not part of the hash

  /// Paradigm defaults scaled to a single CPU: 100 episodes per epoch.
  static ParadigmConfig desk_defaults(ParadigmKind kind);

  /// Parses config text. Every unknown key, malformed value and failed
  /// validation rule is collected into one ConfigError.
  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Sorted `key = value` lines for every hashed field.
  [[nodiscard]] std::string canonical() const;
  /// FNV-1a 64 of canonical(), as 16 hex digits.
  [[nodiscard]] std::string hash() const;
  /// canonical() plus the unhashed fields and a hash comment.
  [[nodiscard]] std::string to_text() const;

  [[nodiscard]] std::vector<std::string> violations() const;
  void validate() const;

  /// Applies one `key = value` assignment; throws ConfigError on bad input.
  void set(std::string_view key, std::string_view value);

  [[nodiscard]] BackboneSpec backbone_spec() const { return {backbone, input_shape}; }
  [[nodiscard]] ProjectorConfig projector_config() const;
};

/// Keys differing between two configs' canonical forms.
std::vector<std::string> differing_keys(const ExperimentConfig& a, const ExperimentConfig& b);

inline constexpr const char* kRunRootEnv = "FEWSHOT_RUN_ROOT";

/// $FEWSHOT_RUN_ROOT, or "runs" when unset.
std::filesystem::path run_root();

}  // namespace fewshot
