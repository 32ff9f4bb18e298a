#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fewshot/harness/config.hpp"

namespace fewshot {

struct AblationRow {
  std::string label;
  std::string projector;  ///< projector flags, as in ExperimentConfig::projector
};

struct AblationGrid {
  std::vector<AblationRow> rows;

  /// The eight projector variants (a) none, (b) input fc, (c) fc+bn,
  /// (d) fc+relu, (e) fc+bn+output fc, (f) fc+relu+output fc,
  /// (g) fc+bn+relu, (h) full.
  static AblationGrid standard();

  /// Throws ConfigError on an empty grid or duplicate labels.
  void validate() const;
};

struct AblationEntry {
  std::string label;
  std::string projector;
  std::string target;
  double mean_accuracy = 0.0;
  double ci_half_width = 0.0;
  double delta = 0.0;  ///< against the first grid row on the same target
  double kl_divergence = 0.0;
  std::string config_hash;
  std::filesystem::path run_dir;
};

/// Runs one experiment per grid row (same seed, data and extractor init;
/// only the projector differs) inside root/<label>/.
std::vector<AblationEntry> run_ablation(const ExperimentConfig& base, const AblationGrid& grid,
                                        const std::filesystem::path& root,
                                        std::ostream* log = nullptr);

/// Tab-separated table with a header line.
std::string format_ablation_table(std::span<const AblationEntry> entries);

struct SweepEntry {
  std::string backbone;
  std::string target;
  double accuracy_none = 0.0;
  double ci_none = 0.0;
  double accuracy_full = 0.0;
  double ci_full = 0.0;
  double delta = 0.0;  ///< full minus none
  std::string hash_none;
  std::string hash_full;
  std::filesystem::path dir_none;
  std::filesystem::path dir_full;
};

/// For each backbone, one run with projector none and one with full inside
/// root/<backbone>-{none,full}/.
std::vector<SweepEntry> run_backbone_sweep(const ExperimentConfig& base,
                                           std::span<const BackboneKind> backbones,
                                           const std::filesystem::path& root,
                                           std::ostream* log = nullptr);

std::string format_sweep_table(std::span<const SweepEntry> entries);

/// Problems with a none/full pair (empty when sound): each run must pass
/// audit_run and the two configs may differ only in the projector.
std::vector<std::string> audit_sweep_pair(const std::filesystem::path& dir_none,
                                          const std::filesystem::path& dir_full);

}  // namespace fewshot
