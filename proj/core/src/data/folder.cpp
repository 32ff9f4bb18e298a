#include "fewshot/data/folder.hpp"

#include <algorithm>
#include <cstdio>
#include <vector>

#include "fewshot/common/error.hpp"
#include "fewshot/data/image_io.hpp"

namespace fewshot {
namespace fs = std::filesystem;

namespace {

bool hidden(const fs::path& p) {
  const auto name = p.filename().string();
  return !name.empty() && name.front() == '.';
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (hidden(entry.path())) continue;
    if (directories ? entry.is_directory() : entry.is_regular_file()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

LabeledDataset load_folder_dataset(const fs::path& root, const ImageShape& shape, std::string name) {
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " does not exist");
  std::vector<std::string> classes;
  std::vector<std::vector<ImageRecord>> items;
  for (const auto& dir : sorted_entries(root, true)) {
    const auto files = sorted_entries(dir, false);
    if (files.empty()) throw DataError("class directory " + dir.string() + " contains no images");
    std::vector<ImageRecord> records;
    records.reserve(files.size());
    for (const auto& file : files) {
      const RawImage raw = read_image(file);
      records.push_back({resize_image(raw, shape), file.string()});
    }
    classes.push_back(dir.filename().string());
    items.push_back(std::move(records));
  }
  if (name.empty()) name = root.filename().empty() ? root.parent_path().filename().string()
                                                   : root.filename().string();
  return LabeledDataset(std::move(name), shape, std::move(classes), std::move(items));
}

void export_folder_dataset(const LabeledDataset& dataset, const fs::path& root) {
  char buf[32];
  for (std::size_t c = 0; c < dataset.class_count(); ++c) {
    const fs::path dir = root / dataset.classes()[c];
    fs::create_directories(dir);
    for (std::size_t i = 0; i < dataset.items_in_class(c); ++i) {
      std::snprintf(buf, sizeof buf, "%05zu.png", i);
      write_png(dir / buf, dataset.shape(), dataset.item({c, i}).pixels);
    }
  }
}

}  // namespace fewshot
