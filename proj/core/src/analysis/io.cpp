#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fewshot/analysis/embeddings.hpp"
#include "fewshot/analysis/report.hpp"
#include "fewshot/common/error.hpp"
#include "json.hpp"

namespace fewshot {
namespace {

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw IoError(where + ": cannot parse number '" + text + "'");
  }
  return v;
}

}  // namespace

void export_embeddings(const FeatureSample& sample, const std::filesystem::path& path) {
  sample.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings to " + path.string());
  const std::size_t d = sample.dim();
  out << "# dim " << d << "\n# count " << sample.count() << "\n# dataset " << sample.dataset
      << "\nlabel";
  for (std::size_t j = 0; j < d; ++j) out << "\tf" << j;
  out << '\n';
  for (std::size_t r = 0; r < sample.count(); ++r) {
    out << sample.labels[r];
    for (double v : sample.features.row(r)) out << '\t' << format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing embeddings to " + path.string());
}

FeatureSample read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file " + path.string());
  std::size_t dim = 0;
  std::size_t count = 0;
  FeatureSample s;
  std::string line;
  bool header_seen = false;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.rfind("# dim ", 0) == 0) {
      dim = std::stoul(line.substr(6));
    } else if (line.rfind("# count ", 0) == 0) {
      count = std::stoul(line.substr(8));
    } else if (line.rfind("# dataset ", 0) == 0) {
      s.dataset = line.substr(10);
    } else if (!header_seen) {
      header_seen = true;  // column names
    } else if (!line.empty()) {
      std::istringstream row(line);
      std::string tok;
      std::getline(row, tok, '\t');
      s.labels.push_back(std::stoul(tok));
      std::size_t cols = 0;
      while (std::getline(row, tok, '\t')) {
        values.push_back(parse_double(tok, path.string()));
        ++cols;
      }
      if (cols != dim) throw IoError(path.string() + ": row has " + std::to_string(cols) + " values");
    }
  }
  if (s.labels.size() != count) throw IoError(path.string() + ": row count differs from header");
  s.features = Matrix({count, dim}, std::move(values));
  return s;
}

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j = {
      {"dataset", r.dataset},
      {"source_dataset", r.source_dataset},
      {"mean_accuracy", r.mean_accuracy},
      {"ci_half_width", r.ci_half_width},
      {"episodes", r.episodes},
      {"kl_divergence", r.kl_divergence},
      {"kl_direction", "KL(target || source)"},
      {"d1", r.d1},
      {"v", r.v},
      {"r", r.r},
      {"config_hash", r.config_hash},
      {"projector", r.projector},
      {"paradigm", r.paradigm},
      {"scale_note", r.scale_note},
  };
  return j.dump(2);
}

MetricsReport report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.source_dataset = j.value("source_dataset", std::string());
    r.mean_accuracy = j.at("mean_accuracy").get<double>();
    r.ci_half_width = j.at("ci_half_width").get<double>();
    r.episodes = j.at("episodes").get<std::size_t>();
    r.kl_divergence = j.at("kl_divergence").get<double>();
    r.d1 = j.at("d1").get<double>();
    r.v = j.at("v").get<double>();
    r.r = j.at("r").get<double>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.projector = j.value("projector", std::string());
    r.paradigm = j.value("paradigm", std::string());
    r.scale_note = j.value("scale_note", std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed metrics report: ") + e.what());
  }
}

void write_report(const std::filesystem::path& path, const MetricsReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << to_json(report) << '\n';
}

MetricsReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

}  // namespace fewshot
