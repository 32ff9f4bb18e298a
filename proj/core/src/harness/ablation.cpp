#include "fewshot/harness/ablation.hpp"

#include <charconv>
#include <ostream>
#include <set>

#include "fewshot/common/error.hpp"
#include "fewshot/harness/run.hpp"

namespace fs = std::filesystem;

namespace fewshot {

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

}  // namespace

AblationGrid AblationGrid::standard() {
  return {{
      {"a", "none"},
      {"b", "input_fc"},
      {"c", "input_fc,bn"},
      {"d", "input_fc,relu"},
      {"e", "input_fc,bn,output_fc"},
      {"f", "input_fc,relu,output_fc"},
      {"g", "input_fc,bn,relu"},
      {"h", "full"},
  }};
}

void AblationGrid::validate() const {
  if (rows.empty()) throw ConfigError("ablation grid has no rows");
  std::set<std::string> seen;
  for (const auto& row : rows) {
    if (row.label.empty()) throw ConfigError("ablation row with an empty label");
    if (!seen.insert(row.label).second) {
      throw ConfigError("duplicate ablation row label '" + row.label + "'");
    }
    (void)parse_projector_flags(row.projector, 1);
  }
}

std::vector<AblationEntry> run_ablation(const ExperimentConfig& base, const AblationGrid& grid,
                                        const fs::path& root, std::ostream* log) {
  grid.validate();
  base.validate();
  if (base.targets.empty()) throw ConfigError("ablation needs at least one target dataset");
  std::vector<AblationEntry> entries;
  std::vector<double> baseline;
  for (std::size_t i = 0; i < grid.rows.size(); ++i) {
    const auto& row = grid.rows[i];
    ExperimentConfig config = base;
    config.projector = parse_projector_flags(row.projector, 1).flags_string();
    config.out = root / row.label;
    if (log) *log << "ablation row (" << row.label << ") projector " << config.projector << '\n';
    const RunResult run = run_experiment(config, log);
    for (std::size_t t = 0; t < run.reports.size(); ++t) {
      const auto& rep = run.reports[t];
      if (i == 0) baseline.push_back(rep.mean_accuracy);
      entries.push_back({row.label, config.projector, rep.dataset, rep.mean_accuracy,
                         rep.ci_half_width, rep.mean_accuracy - baseline[t], rep.kl_divergence,
                         run.config_hash, run.dir});
    }
  }
  return entries;
}

std::string format_ablation_table(std::span<const AblationEntry> entries) {
  std::string out = "row\tprojector\ttarget\tmean_accuracy\tci_half_width\tdelta\tkl\tconfig_hash\n";
  for (const auto& e : entries) {
    out += e.label + '\t' + e.projector + '\t' + e.target + '\t' + num(e.mean_accuracy) + '\t' +
           num(e.ci_half_width) + '\t' + num(e.delta) + '\t' + num(e.kl_divergence) + '\t' +
           e.config_hash + '\n';
  }
  return out;
}

std::vector<SweepEntry> run_backbone_sweep(const ExperimentConfig& base,
                                           std::span<const BackboneKind> backbones,
                                           const fs::path& root, std::ostream* log) {
  if (backbones.empty()) throw ConfigError("backbone sweep needs at least one backbone");
  if (base.targets.empty()) throw ConfigError("backbone sweep needs at least one target dataset");
  for (BackboneKind kind : backbones) BackboneSpec{kind, base.input_shape}.validate();

  std::vector<SweepEntry> entries;
  for (BackboneKind kind : backbones) {
    ExperimentConfig none = base;
    none.backbone = kind;
    none.projector = "none";
    none.out = root / (to_string(kind) + "-none");
    ExperimentConfig full = none;
    full.projector = "full";
    full.out = root / (to_string(kind) + "-full");
    if (log) *log << "sweep " << to_string(kind) << '\n';
    const RunResult a = run_experiment(none, log);
    const RunResult b = run_experiment(full, log);
    for (std::size_t t = 0; t < a.reports.size(); ++t) {
      const auto& ra = a.reports[t];
      const auto& rb = b.reports[t];
      entries.push_back({to_string(kind), ra.dataset, ra.mean_accuracy, ra.ci_half_width,
                         rb.mean_accuracy, rb.ci_half_width, rb.mean_accuracy - ra.mean_accuracy,
                         a.config_hash, b.config_hash, a.dir, b.dir});
    }
  }
  return entries;
}

std::string format_sweep_table(std::span<const SweepEntry> entries) {
  std::string out =
      "backbone\ttarget\taccuracy_none\tci_none\taccuracy_full\tci_full\tdelta\thash_none\thash_full\n";
  for (const auto& e : entries) {
    out += e.backbone + '\t' + e.target + '\t' + num(e.accuracy_none) + '\t' + num(e.ci_none) +
           '\t' + num(e.accuracy_full) + '\t' + num(e.ci_full) + '\t' + num(e.delta) + '\t' +
           e.hash_none + '\t' + e.hash_full + '\n';
  }
  return out;
}

std::vector<std::string> audit_sweep_pair(const fs::path& dir_none, const fs::path& dir_full) {
  std::vector<std::string> problems;
  for (const auto& dir : {dir_none, dir_full}) {
    for (const auto& p : audit_run(dir)) problems.push_back(dir.filename().string() + ": " + p);
  }
  if (!problems.empty()) return problems;
  const auto a = ExperimentConfig::load(dir_none / kConfigFile);
  const auto b = ExperimentConfig::load(dir_full / kConfigFile);
  for (const auto& key : differing_keys(a, b)) {
    if (key != "projector") problems.push_back("pair differs in '" + key + "'");
  }
  if (a.projector != "none") problems.push_back("first run of the pair is not projector none");
  if (b.projector != "full") problems.push_back("second run of the pair is not projector full");
  return problems;
}

}  // namespace fewshot
