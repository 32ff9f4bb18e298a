#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fewshot/analysis/report.hpp"
#include "fewshot/data/dataset.hpp"
#include "fewshot/harness/config.hpp"
#include "fewshot/model/model.hpp"
#include "fewshot/paradigms/evaluation.hpp"

namespace fewshot {

/// File names inside a run directory.
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kCheckpointFile = "checkpoint.json";
inline constexpr const char* kTrainLogFile = "train_log.tsv";
inline constexpr const char* kReportDir = "reports";

struct RunResult {
  std::filesystem::path dir;
  std::string config_hash;
  TrainHistory history;
  std::vector<MetricsReport> reports;  ///< one per target, in config order
};

/// Fresh model for a config: the classifier has one output per source class
/// (non-episodic), train_way outputs (meta) or none (metric).
ModelBundle create_model_for(const ExperimentConfig& config, std::size_t source_classes);

/// Dispatches to the paradigm's training loop.
TrainHistory train_model(ModelBundle& bundle, const ExperimentConfig& config,
                         const LabeledDataset& source, const EpochCallback& on_epoch = {});

/// Episodic accuracy and feature diagnostics of one target.
MetricsReport evaluate_target(const ModelBundle& bundle, const ExperimentConfig& config,
                              const LabeledDataset& source, const FeatureBank& source_bank,
                              const LabeledDataset& target);

/// Directory a config writes to: config.out, or <run root>/<paradigm>-<hash>.
std::filesystem::path run_directory(const ExperimentConfig& config);

/// Trains, checkpoints and evaluates every target. Writes config.txt,
/// checkpoint.json, an append-only train_log.tsv and reports/<target>.json,
/// all stamped with the config hash. Progress lines go to `log` if given.
RunResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Provenance problems of a run directory (empty when consistent): config,
/// checkpoint, log and every report must carry the same config hash.
std::vector<std::string> audit_run(const std::filesystem::path& dir);

/// Throws ConfigError when a report's hash differs from the checkpoint's.
void require_matching_hash(const MetricsReport& report, const std::string& checkpoint_hash,
                           const std::string& what);

std::string scale_note(const ExperimentConfig& config);

}  // namespace fewshot
