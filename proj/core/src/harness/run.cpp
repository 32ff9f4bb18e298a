#include "fewshot/harness/run.hpp"

#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "fewshot/common/error.hpp"
#include "fewshot/common/rng.hpp"
#include "fewshot/harness/datasets.hpp"
#include "fewshot/harness/diagnostics.hpp"
#include "fewshot/model/checkpoint.hpp"
#include "fewshot/paradigms/meta.hpp"
#include "fewshot/paradigms/metric.hpp"
#include "fewshot/paradigms/nonepisodic.hpp"

namespace fs = std::filesystem;

namespace fewshot {

namespace {

std::string file_stem_for(const std::string& name) {
  std::string out = name;
  for (char& ch : out) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                    ch == '-' || ch == '_' || ch == '.';
    if (!ok) ch = '_';
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

constexpr const char* kLogHashPrefix = "# config_hash\t";

}  // namespace

std::string scale_note(const ExperimentConfig& config) {
  return "desk-scale, not full-scale: " + to_string(config.backbone) + " on " +
         to_string(config.input_shape) + " inputs, " + std::to_string(config.paradigm.epochs) +
         " epochs; learning rates are desk defaults";
}

ModelBundle create_model_for(const ExperimentConfig& config, std::size_t source_classes) {
  ModelSpec spec;
  spec.backbone = config.backbone_spec();
  spec.projector = config.projector_config();
  spec.head_kind = config.paradigm.head;
  spec.head_init = config.paradigm.head == HeadKind::cosine ? HeadInit::he : HeadInit::zero;
  switch (config.paradigm.kind) {
    case ParadigmKind::non_episodic: spec.num_classes = source_classes; break;
    case ParadigmKind::meta: spec.num_classes = config.paradigm.train_way; break;
    case ParadigmKind::metric: spec.num_classes = 0; break;
  }
  return create_model(spec, derive_seed(config.seed, "model"));
}

TrainHistory train_model(ModelBundle& bundle, const ExperimentConfig& config,
                         const LabeledDataset& source, const EpochCallback& on_epoch) {
  const std::uint64_t seed = derive_seed(config.seed, "train");
  switch (config.paradigm.kind) {
    case ParadigmKind::non_episodic:
      return pretrain_nonepisodic(bundle, source, config.paradigm, seed, on_epoch);
    case ParadigmKind::meta: return train_meta(bundle, source, config.paradigm, seed, on_epoch);
    case ParadigmKind::metric: return train_metric(bundle, source, config.paradigm, seed, on_epoch);
  }
  throw ConfigError("unknown paradigm");
}

MetricsReport evaluate_target(const ModelBundle& bundle, const ExperimentConfig& config,
                              const LabeledDataset& source, const FeatureBank& source_bank,
                              const LabeledDataset& target) {
  const FeatureBank target_bank(bundle, target);
  EvalSpec spec = config.eval;
  spec.threads = config.threads;
  const auto eval = evaluate_episodes(target_bank, target, spec,
                                      derive_seed(config.seed, "eval", {}));
  const auto diag = compute_diagnostics(source_bank, source, target_bank, target,
                                        config.metrics_subsample,
                                        derive_seed(config.seed, "metrics"), config.inter_class);
  MetricsReport r;
  r.dataset = target.name();
  r.source_dataset = source.name();
  r.mean_accuracy = eval.summary.mean;
  r.ci_half_width = eval.summary.ci_half_width;
  r.episodes = eval.summary.count;
  r.kl_divergence = diag.kl;
  r.d1 = diag.cluster.d1;
  r.v = diag.cluster.v;
  r.r = diag.cluster.r;
  r.config_hash = config.hash();
  r.projector = config.projector_config().flags_string();
  r.paradigm = to_string(config.paradigm.kind);
  r.scale_note = scale_note(config);
  return r;
}

fs::path run_directory(const ExperimentConfig& config) {
  if (!config.out.empty()) return config.out;
  return run_root() / (to_string(config.paradigm.kind) + "-" + config.hash());
}

RunResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  RunResult result;
  result.config_hash = config.hash();
  result.dir = run_directory(config);

  const LabeledDataset source = resolve_dataset(config.source, config.input_shape);
  std::vector<LabeledDataset> targets;
  std::set<std::string> names;
  for (const auto& ref : config.targets) {
    targets.push_back(resolve_dataset(ref, config.input_shape));
    if (!names.insert(targets.back().name()).second) {
      throw ConfigError("two targets are both named '" + targets.back().name() + "'");
    }
  }

  fs::create_directories(result.dir);
  write_text(result.dir / kConfigFile, config.to_text());

  const fs::path log_path = result.dir / kTrainLogFile;
  const bool fresh_log = !fs::exists(log_path);
  std::ofstream train_log(log_path, std::ios::app);
  if (!train_log) throw IoError("cannot append to '" + log_path.string() + "'");
  if (fresh_log) train_log << "epoch\tloss\taccuracy\tlr\twall_seconds\n";
  train_log << kLogHashPrefix << result.config_hash << '\n';

  ModelBundle bundle = create_model_for(config, source.class_count());
  if (log) {
    *log << "training " << to_string(config.paradigm.kind) << " / " << to_string(config.backbone)
         << " / projector " << config.projector << " on " << source.name() << " ("
         << source.class_count() << " classes, " << source.total_items() << " items)\n";
  }
  result.history = train_model(bundle, config, source, [&](const EpochRecord& e) {
    train_log << e.epoch << '\t' << e.loss << '\t' << e.accuracy << '\t' << e.lr << '\t'
              << e.wall_seconds << '\n';
    train_log.flush();
    if (log) {
      *log << "  epoch " << e.epoch << "  loss " << e.loss << "  acc " << e.accuracy << "  lr "
           << e.lr << "  (" << e.wall_seconds << " s)\n";
    }
  });
  save_checkpoint(result.dir / kCheckpointFile, bundle, result.config_hash,
                  to_string(config.paradigm.kind));

  if (targets.empty()) return result;
  const FeatureBank source_bank(bundle, source);
  fs::create_directories(result.dir / kReportDir);
  for (const auto& target : targets) {
    auto report = evaluate_target(bundle, config, source, source_bank, target);
    write_report(result.dir / kReportDir / (file_stem_for(target.name()) + ".json"), report);
    if (log) {
      *log << "  " << target.name() << ": accuracy " << report.mean_accuracy << " +- "
           << report.ci_half_width << "  kl " << report.kl_divergence << '\n';
    }
    result.reports.push_back(std::move(report));
  }
  return result;
}

void require_matching_hash(const MetricsReport& report, const std::string& checkpoint_hash,
                           const std::string& what) {
  if (report.config_hash != checkpoint_hash) {
    throw ConfigError(what + " carries config hash '" + report.config_hash +
                      "' but the checkpoint was produced by '" + checkpoint_hash + "'");
  }
}

std::vector<std::string> audit_run(const fs::path& dir) {
  std::vector<std::string> problems;
  std::string expected;
  try {
    std::ifstream in(dir / kConfigFile);
    if (!in) throw IoError("missing " + std::string(kConfigFile));
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    expected = ExperimentConfig::parse(text).hash();
    const std::string stamp = "# config_hash = ";
    if (!text.starts_with(stamp) || text.substr(stamp.size(), expected.size()) != expected) {
      problems.push_back("config.txt hash comment does not match its contents");
    }
  } catch (const Error& e) {
    problems.push_back(std::string("config: ") + e.what());
    return problems;
  }
  try {
    const auto ckpt = load_checkpoint(dir / kCheckpointFile);
    if (ckpt.config_hash != expected) {
      problems.push_back("checkpoint hash " + ckpt.config_hash + " != config hash " + expected);
    }
  } catch (const Error& e) {
    problems.push_back(std::string("checkpoint: ") + e.what());
  }
  std::ifstream train_log(dir / kTrainLogFile);
  if (!train_log) {
    problems.push_back("missing " + std::string(kTrainLogFile));
  } else {
    std::string line;
    while (std::getline(train_log, line)) {
      if (line.starts_with(kLogHashPrefix) &&
          line.substr(std::string_view(kLogHashPrefix).size()) != expected) {
        problems.push_back("train log segment stamped with a different config hash");
      }
    }
  }
  if (fs::is_directory(dir / kReportDir)) {
    for (const auto& entry : fs::directory_iterator(dir / kReportDir)) {
      if (entry.path().extension() != ".json") continue;
      try {
        const auto report = read_report(entry.path());
        if (report.config_hash != expected) {
          problems.push_back("report " + entry.path().filename().string() + " hash " +
                             report.config_hash + " != config hash " + expected);
        }
      } catch (const Error& e) {
        problems.push_back("report " + entry.path().filename().string() + ": " + e.what());
      }
    }
  }
  return problems;
}

}  // namespace fewshot
