#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fewshot/analysis/report.hpp"

namespace fewshot {

struct PlotRow {
  std::string dataset;
  double kl = 0.0;
  double accuracy = 0.0;
  double ci = 0.0;

  friend bool operator==(const PlotRow&, const PlotRow&) = default;
};

/// One row per report, sorted by dataset name.
std::vector<PlotRow> plot_rows(std::span<const MetricsReport> reports);

/// Tab-separated `dataset kl accuracy ci` with a header line, preceded by a
/// `# config_hash` comment listing every producing hash. Throws ConfigError
/// for an empty list.
void emit_plot_data(std::span<const MetricsReport> reports, const std::filesystem::path& path);

std::vector<PlotRow> read_plot_data(const std::filesystem::path& path);

}  // namespace fewshot
