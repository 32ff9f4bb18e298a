#include "fewshot/harness/plot_data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>

#include "fewshot/common/error.hpp"

namespace fewshot {

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

double parse_double(std::string_view text, const std::filesystem::path& path) {
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw IoError("'" + path.string() + "': bad number '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

std::vector<PlotRow> plot_rows(std::span<const MetricsReport> reports) {
  std::vector<PlotRow> rows;
  rows.reserve(reports.size());
  for (const auto& r : reports) rows.push_back({r.dataset, r.kl_divergence, r.mean_accuracy, r.ci_half_width});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const PlotRow& a, const PlotRow& b) { return a.dataset < b.dataset; });
  return rows;
}

void emit_plot_data(std::span<const MetricsReport> reports, const std::filesystem::path& path) {
  if (reports.empty()) throw ConfigError("plot data needs at least one report");
  std::set<std::string> hashes;
  for (const auto& r : reports) hashes.insert(r.config_hash);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "# config_hash";
  for (const auto& h : hashes) out << ' ' << h;
  out << "\ndataset\tkl\taccuracy\tci\n";
  for (const auto& row : plot_rows(reports)) {
    out << row.dataset << '\t' << num(row.kl) << '\t' << num(row.accuracy) << '\t' << num(row.ci)
        << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<PlotRow> read_plot_data(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::vector<PlotRow> rows;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "dataset\tkl\taccuracy\tci") throw IoError("'" + path.string() + "': bad header");
      header = true;
      continue;
    }
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    for (auto pos = rest.find('\t'); pos != std::string_view::npos; pos = rest.find('\t')) {
      cols.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    cols.push_back(rest);
    if (cols.size() != 4) throw IoError("'" + path.string() + "': expected 4 columns in '" + line + "'");
    rows.push_back({std::string(cols[0]), parse_double(cols[1], path), parse_double(cols[2], path),
                    parse_double(cols[3], path)});
  }
  return rows;
}

}  // namespace fewshot
