// fewshot: train, evaluate and analyse few-shot models from the command line.
//
// The run root for generated run directories comes from $FEWSHOT_RUN_ROOT
// (default ./runs).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fewshot/analysis/embeddings.hpp"
#include "fewshot/analysis/report.hpp"
#include "fewshot/common/error.hpp"
#include "fewshot/data/folder.hpp"
#include "fewshot/data/synthetic.hpp"
#include "fewshot/harness/ablation.hpp"
#include "fewshot/harness/config.hpp"
#include "fewshot/harness/datasets.hpp"
#include "fewshot/harness/diagnostics.hpp"
#include "fewshot/harness/plot_data.hpp"
#include "fewshot/harness/run.hpp"
#include "fewshot/model/checkpoint.hpp"
#include "fewshot/paradigms/evaluation.hpp"

namespace fs = std::filesystem;
using namespace fewshot;

namespace {

struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;
};

void add_config_args(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.file, "Experiment config file (key = value lines)");
  cmd->add_option("--set", args.sets, "Override one config entry, key=value (repeatable)");
}

std::string trimmed(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  return std::string(s.substr(a, s.find_last_not_of(" \t\r") - a + 1));
}

/// Config file entries, then `extra`, then --set overrides; later entries
/// replace earlier ones with the same key.
ExperimentConfig build_config(const ConfigArgs& args, const std::vector<std::string>& extra) {
  std::map<std::string, std::string> entries;
  if (!args.file.empty()) {
    std::ifstream in(args.file);
    if (!in) throw IoError("cannot read config file '" + args.file + "'");
    for (std::string line; std::getline(in, line);) {
      const auto t = trimmed(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError("line '" + t + "': expected key = value");
      if (!entries.emplace(trimmed(t.substr(0, eq)), trimmed(t.substr(eq + 1))).second) {
        throw ConfigError("duplicate key '" + trimmed(t.substr(0, eq)) + "' in " + args.file);
      }
    }
  }
  std::vector<std::string> overrides = extra;
  overrides.insert(overrides.end(), args.sets.begin(), args.sets.end());
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    entries[trimmed(o.substr(0, eq))] = trimmed(o.substr(eq + 1));
  }
  std::string text;
  for (const auto& [k, v] : entries) text += k + " = " + v + "\n";
  return ExperimentConfig::parse(text);
}

/// Writes `report` to `path`, merging into an existing report for the same
/// dataset. An existing report from a different checkpoint is rejected.
void store_report(const fs::path& path, MetricsReport report, bool accuracy_part) {
  if (fs::exists(path)) {
    const MetricsReport old = read_report(path);
    require_matching_hash(old, report.config_hash, "existing report '" + path.string() + "'");
    if (old.dataset == report.dataset) {
      if (accuracy_part) {
        report.kl_divergence = old.kl_divergence;
        report.d1 = old.d1;
        report.v = old.v;
        report.r = old.r;
        if (report.source_dataset.empty()) report.source_dataset = old.source_dataset;
      } else {
        report.mean_accuracy = old.mean_accuracy;
        report.ci_half_width = old.ci_half_width;
        report.episodes = old.episodes;
      }
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_report(path, report);
}

int cmd_train(const ConfigArgs& cargs, const std::string& paradigm, const std::string& backbone,
              const std::string& projector, const std::string& dataset, const std::string& synth,
              std::optional<std::size_t> epochs, std::optional<std::uint64_t> seed,
              std::string out) {
  std::vector<std::string> extra;
  if (!paradigm.empty()) extra.push_back("paradigm=" + paradigm);
  if (!backbone.empty()) extra.push_back("backbone=" + backbone);
  if (!projector.empty()) extra.push_back("projector=" + projector);
  if (!dataset.empty()) extra.push_back("source=" + dataset);
  if (!synth.empty()) extra.push_back("source=manifest:" + synth);
  if (epochs) extra.push_back("epochs=" + std::to_string(*epochs));
  if (seed) extra.push_back("seed=" + std::to_string(*seed));
  extra.push_back("targets=");
  const ExperimentConfig config = build_config(cargs, extra);
  const LabeledDataset source = resolve_dataset(config.source, config.input_shape);
  ModelBundle bundle = create_model_for(config, source.class_count());
  std::cout << "training " << to_string(config.paradigm.kind) << " on " << source.name()
            << " (config " << config.hash() << ")\n";
  train_model(bundle, config, source, [](const EpochRecord& e) {
    std::cout << "epoch " << e.epoch << "\tloss " << e.loss << "\tacc " << e.accuracy << "\tlr "
              << e.lr << "\t" << e.wall_seconds << " s\n";
  });
  if (out.empty()) out = (run_directory(config) / kCheckpointFile).string();
  const fs::path path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_checkpoint(path, bundle, config.hash(), to_string(config.paradigm.kind));
  fs::path config_path = path;
  config_path.replace_extension(".config.txt");
  std::ofstream(config_path) << config.to_text();
  std::cout << "checkpoint written to " << path.string() << '\n';
  return 0;
}

int cmd_tune_eval(const std::string& checkpoint, const std::string& dataset, EvalSpec spec,
                  std::uint64_t seed, const std::string& report_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const LabeledDataset target = resolve_dataset(dataset, ckpt.bundle.backbone.input);
  const EvalResult r = evaluate_episodes(ckpt.bundle, target, spec, seed);
  std::cout << target.name() << ": " << spec.way << "-way " << spec.shot << "-shot, "
            << spec.episodes << " episodes: accuracy " << r.summary.mean << " +- "
            << r.summary.ci_half_width << '\n';
  if (!report_path.empty()) {
    MetricsReport rep;
    rep.dataset = target.name();
    rep.mean_accuracy = r.summary.mean;
    rep.ci_half_width = r.summary.ci_half_width;
    rep.episodes = r.summary.count;
    rep.config_hash = ckpt.config_hash;
    rep.projector = ckpt.bundle.projector.flags_string();
    rep.paradigm = ckpt.paradigm;
    store_report(report_path, rep, true);
  }
  return 0;
}

int cmd_metrics(const std::string& checkpoint, const std::string& source_ref,
                const std::string& target_ref, std::size_t subsample, std::uint64_t seed,
                const std::string& inter, const std::string& out, const std::string& embeddings) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto& shape = ckpt.bundle.backbone.input;
  const LabeledDataset source = resolve_dataset(source_ref, shape);
  const LabeledDataset target = resolve_dataset(target_ref, shape);
  const FeatureBank source_bank(ckpt.bundle, source);
  const FeatureBank target_bank(ckpt.bundle, target);
  const Diagnostics d = compute_diagnostics(source_bank, source, target_bank, target, subsample,
                                            seed, parse_inter_class_distance(inter));
  std::cout << "KL(" << target.name() << " || " << source.name() << ") = " << d.kl << "  over "
            << d.subsample << " items each\n"
            << "D1 " << d.cluster.d1 << "  V " << d.cluster.v << "  r " << d.cluster.r << '\n';
  if (!embeddings.empty()) {
    export_embeddings(sample_features(target_bank, target, subsample, seed), embeddings);
  }
  if (!out.empty()) {
    MetricsReport rep;
    rep.dataset = target.name();
    rep.source_dataset = source.name();
    rep.kl_divergence = d.kl;
    rep.d1 = d.cluster.d1;
    rep.v = d.cluster.v;
    rep.r = d.cluster.r;
    rep.config_hash = ckpt.config_hash;
    rep.projector = ckpt.bundle.projector.flags_string();
    rep.paradigm = ckpt.paradigm;
    store_report(out, rep, false);
  }
  return 0;
}

fs::path default_root(const std::string& root, const char* kind, const ExperimentConfig& c) {
  return root.empty() ? run_root() / (std::string(kind) + "-" + c.hash()) : fs::path(root);
}

void write_table(const fs::path& path, const std::string& table) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << table;
}

int cmd_ablate(const ConfigArgs& cargs, const std::string& root_arg, const std::string& table) {
  const ExperimentConfig base = build_config(cargs, {});
  const fs::path root = default_root(root_arg, "ablation", base);
  const auto entries = run_ablation(base, AblationGrid::standard(), root, &std::cout);
  const std::string text = format_ablation_table(entries);
  std::cout << text;
  write_table(table.empty() ? root / "ablation.tsv" : fs::path(table), text);
  return 0;
}

int cmd_sweep(const ConfigArgs& cargs, const std::vector<std::string>& names,
              const std::string& root_arg, const std::string& table) {
  const ExperimentConfig base = build_config(cargs, {});
  std::vector<BackboneKind> kinds;
  for (const auto& n : names) kinds.push_back(parse_backbone_kind(n));
  const fs::path root = default_root(root_arg, "sweep", base);
  const auto entries = run_backbone_sweep(base, kinds, root, &std::cout);
  int status = 0;
  for (const auto& e : entries) {
    for (const auto& p : audit_sweep_pair(e.dir_none, e.dir_full)) {
      std::cerr << "audit: " << p << '\n';
      status = 1;
    }
  }
  const std::string text = format_sweep_table(entries);
  std::cout << text;
  write_table(table.empty() ? root / "sweep.tsv" : fs::path(table), text);
  return status;
}

int cmd_make_synth(SyntheticSpec spec, const std::string& shape, const std::string& shift_kind,
                   const std::string& out, const std::string& export_dir) {
  spec.shape = parse_image_shape(shape);
  spec.shift.kind = parse_shift_kind(shift_kind);
  const LabeledDataset ds = make_synthetic_domain(spec);
  if (spec.name.empty()) spec.name = ds.name();
  write_manifest(out, spec);
  std::cout << "wrote manifest " << out << " for " << ds.name() << " (" << ds.class_count()
            << " classes, " << ds.total_items() << " items, fingerprint " << ds.fingerprint()
            << ")\n";
  if (!export_dir.empty()) export_folder_dataset(ds, export_dir);
  return 0;
}

void collect_reports(const fs::path& p, std::vector<fs::path>& out) {
  if (fs::is_directory(p)) {
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file() && e.path().extension() == ".json" &&
          e.path().parent_path().filename() == kReportDir) {
        found.push_back(e.path());
      }
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  } else {
    out.push_back(p);
  }
}

int cmd_plot_data(const std::vector<std::string>& inputs, const std::string& checkpoint,
                  const std::string& out) {
  std::vector<fs::path> paths;
  for (const auto& in : inputs) collect_reports(in, paths);
  std::vector<MetricsReport> reports;
  std::string expected;
  if (!checkpoint.empty()) expected = load_checkpoint(checkpoint).config_hash;
  for (const auto& p : paths) {
    MetricsReport r = read_report(p);
    if (!expected.empty()) require_matching_hash(r, expected, "report '" + p.string() + "'");
    reports.push_back(std::move(r));
  }
  emit_plot_data(reports, out);
  std::cout << "wrote " << reports.size() << " rows to " << out << '\n';
  return 0;
}

int cmd_run(const ConfigArgs& cargs) {
  const RunResult r = run_experiment(build_config(cargs, {}), &std::cout);
  std::cout << "run directory " << r.dir.string() << '\n';
  return 0;
}

int cmd_audit(const std::vector<std::string>& dirs) {
  int status = 0;
  for (const auto& d : dirs) {
    const auto problems = audit_run(d);
    std::cout << d << ": " << (problems.empty() ? "ok" : "FAILED") << '\n';
    for (const auto& p : problems) std::cout << "  " << p << '\n';
    if (!problems.empty()) status = 1;
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot training with an MLP projector: train, evaluate, analyse"};
  app.require_subcommand(1);

  // train
  ConfigArgs train_cfg;
  std::string paradigm, backbone, projector, dataset, synth, train_out;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> train_seed;
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_config_args(train, train_cfg);
  train->add_option("--paradigm", paradigm, "nonepisodic, meta or metric")
      ->check(CLI::IsMember({"nonepisodic", "meta", "metric"}));
  train->add_option("--backbone", backbone, "conv32f-tiny or conv64f");
  train->add_option("--projector", projector, "none, full or a comma list of input_fc,bn,relu,output_fc");
  auto* ds_opt = train->add_option("--dataset", dataset, "Source dataset reference");
  train->add_option("--synth", synth, "Source synthetic manifest")->excludes(ds_opt);
  train->add_option("--epochs", epochs, "Training epochs");
  train->add_option("--seed", train_seed, "Global seed");
  train->add_option("--out", train_out, "Checkpoint path");

  // tune-eval
  std::string te_ckpt, te_dataset, te_report, te_method = "tune", te_head = "linear";
  EvalSpec te_spec;
  std::uint64_t te_seed = 0;
  auto* te = app.add_subcommand("tune-eval", "Episodic evaluation of a checkpoint on a target");
  te->add_option("--checkpoint", te_ckpt)->required();
  te->add_option("--dataset", te_dataset, "Target dataset reference")->required();
  te->add_option("--way", te_spec.way)->capture_default_str();
  te->add_option("--shot", te_spec.shot)->capture_default_str();
  te->add_option("--query", te_spec.query)->capture_default_str();
  te->add_option("--episodes", te_spec.episodes)->capture_default_str();
  te->add_option("--tune-steps", te_spec.tune.steps)->capture_default_str();
  te->add_option("--tune-lr", te_spec.tune.lr)->capture_default_str();
  te->add_option("--tune-head", te_head, "linear or cosine")->capture_default_str();
  te->add_option("--method", te_method, "tune (fresh head) or proto (nearest prototype)")
      ->capture_default_str();
  te->add_option("--distance", te_spec.distance, "")->transform(
      CLI::CheckedTransformer(std::map<std::string, DistanceKind>{
          {"sq_euclidean", DistanceKind::sq_euclidean}, {"cosine", DistanceKind::cosine}}));
  te->add_option("--threads", te_spec.threads, "0 = all cores")->capture_default_str();
  te->add_option("--seed", te_seed)->capture_default_str();
  te->add_option("--report", te_report, "MetricsReport output path");

  // metrics
  std::string m_ckpt, m_source, m_target, m_out, m_inter = "centroid", m_emb;
  std::size_t m_subsample = 2000;
  std::uint64_t m_seed = 0;
  auto* metrics = app.add_subcommand("metrics", "Feature KL divergence and cluster metrics");
  metrics->add_option("--checkpoint", m_ckpt)->required();
  metrics->add_option("--source-dataset", m_source)->required();
  metrics->add_option("--target-dataset", m_target)->required();
  metrics->add_option("--subsample", m_subsample)->capture_default_str();
  metrics->add_option("--seed", m_seed)->capture_default_str();
  metrics->add_option("--inter-class", m_inter, "centroid or items")->capture_default_str();
  metrics->add_option("--embeddings", m_emb, "Also export target embeddings (TSV)");
  metrics->add_option("--out", m_out, "MetricsReport output path");

  // ablate
  ConfigArgs ab_cfg;
  std::string ab_root, ab_table;
  auto* ablate = app.add_subcommand("ablate", "Projector component ablation, rows (a)-(h)");
  add_config_args(ablate, ab_cfg);
  ablate->add_option("--root", ab_root, "Directory for the per-row runs");
  ablate->add_option("--table", ab_table, "Output table path");

  // sweep
  ConfigArgs sw_cfg;
  std::string sw_root, sw_table;
  std::vector<std::string> sw_backbones{"conv32f-tiny", "conv64f"};
  auto* sweep = app.add_subcommand("sweep", "Projector none vs full across backbones");
  add_config_args(sweep, sw_cfg);
  sweep->add_option("--backbones", sw_backbones)->delimiter(',')->capture_default_str();
  sweep->add_option("--root", sw_root, "Directory for the runs");
  sweep->add_option("--table", sw_table, "Output table path");

  // make-synth
  SyntheticSpec ms;
  std::string ms_shape = "3x32x32", ms_shift = "none", ms_out, ms_export;
  bool ms_null = false;
  auto* make_synth = app.add_subcommand("make-synth", "Write a synthetic domain manifest");
  make_synth->add_option("--classes", ms.classes)->capture_default_str();
  make_synth->add_option("--items", ms.items_per_class)->capture_default_str();
  make_synth->add_option("--shape", ms_shape, "CxHxW")->capture_default_str();
  make_synth->add_option("--shift-kind", ms_shift, "none, channel-affine, hue-like-permutation, blur")
      ->capture_default_str();
  make_synth->add_option("--shift-magnitude", ms.shift.magnitude)->capture_default_str();
  make_synth->add_option("--shift-seed", ms.shift.seed)->capture_default_str();
  make_synth->add_option("--seed", ms.base_seed)->capture_default_str();
  make_synth->add_option("--name", ms.name);
  make_synth->add_flag("--null-signal", ms_null, "All classes share one pattern");
  make_synth->add_option("--out", ms_out, "Manifest path")->required();
  make_synth->add_option("--export-folder", ms_export, "Also write the images as PNG folders");

  // plot-data
  std::vector<std::string> pd_inputs;
  std::string pd_ckpt, pd_out;
  auto* plot = app.add_subcommand("plot-data", "Collect reports into a dataset/kl/accuracy table");
  plot->add_option("inputs", pd_inputs, "Report files or run directories")->required();
  plot->add_option("--checkpoint", pd_ckpt, "Reject reports not produced by this checkpoint");
  plot->add_option("--out", pd_out)->required();

  // run, audit
  ConfigArgs run_cfg;
  auto* run = app.add_subcommand("run", "Train, checkpoint and evaluate every target of a config");
  add_config_args(run, run_cfg);
  std::vector<std::string> audit_dirs;
  auto* audit = app.add_subcommand("audit", "Check config-hash provenance of run directories");
  audit->add_option("dirs", audit_dirs)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      return cmd_train(train_cfg, paradigm, backbone, projector, dataset, synth, epochs, train_seed,
                       train_out);
    }
    if (*te) {
      te_spec.method = parse_eval_method(te_method);
      te_spec.tune.head = parse_head_kind(te_head);
      return cmd_tune_eval(te_ckpt, te_dataset, te_spec, te_seed, te_report);
    }
    if (*metrics) {
      return cmd_metrics(m_ckpt, m_source, m_target, m_subsample, m_seed, m_inter, m_out, m_emb);
    }
    if (*ablate) return cmd_ablate(ab_cfg, ab_root, ab_table);
    if (*sweep) return cmd_sweep(sw_cfg, sw_backbones, sw_root, sw_table);
    if (*make_synth) {
      ms.distinct_classes = !ms_null;
      return cmd_make_synth(ms, ms_shape, ms_shift, ms_out, ms_export);
    }
    if (*plot) return cmd_plot_data(pd_inputs, pd_ckpt, pd_out);
    if (*run) return cmd_run(run_cfg);
    if (*audit) return cmd_audit(audit_dirs);
  } catch (const fewshot::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
