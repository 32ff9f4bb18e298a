#pragma once

#include <filesystem>
#include <string>

namespace fewshot {

/// Evaluation and diagnostic numbers for one (model, target dataset) pair.
struct MetricsReport {
  std::string dataset;
  std::string source_dataset;
  double mean_accuracy = 0.0;
  double ci_half_width = 0.0;
  std::size_t episodes = 0;
  double kl_divergence = 0.0;  ///< KL(target || source) over extractor features
  double d1 = 0.0;
  double v = 0.0;
  double r = 0.0;
  std::string config_hash;
  std::string projector;
  std::string paradigm;
  std::string scale_note = "desk-scale run (synthetic or small data); not full-scale";

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Flat JSON object, one key per field plus a fixed "kl_direction" entry.
std::string to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

void write_report(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_report(const std::filesystem::path& path);

}  // namespace fewshot
