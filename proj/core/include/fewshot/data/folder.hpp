#pragma once

#include <filesystem>
#include <string>

#include "fewshot/data/dataset.hpp"
#include "fewshot/data/synthetic.hpp"

namespace fewshot {

/// Loads root/<class>/<image> trees. Classes and files are taken in
/// lexicographic order; hidden entries (leading '.') are skipped. Images are
/// resized to `shape` and scaled to [0, 1].
/// Throws IoError for a missing root or an undecodable file and DataError for
/// an empty class directory; every message names the offending path.
LabeledDataset load_folder_dataset(const std::filesystem::path& root, const ImageShape& shape,
                                   std::string name = "");

/// Writes a dataset as a folder tree of PNG files loadable by
/// load_folder_dataset.
void export_folder_dataset(const LabeledDataset& dataset, const std::filesystem::path& root);

}  // namespace fewshot
