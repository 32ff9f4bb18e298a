#pragma once

#include <filesystem>

#include "fewshot/analysis/feature_sample.hpp"

namespace fewshot {

/// Writes a tab-separated text file:
///   # dim <d>
///   # count <n>
///   # dataset <name>
///   label  f0  f1 ... f{d-1}
///   <label> <values...>          (one row per sample)
/// Values use round-trip precision. Throws ConfigError for an invalid sample
/// and IoError when the path cannot be written.
void export_embeddings(const FeatureSample& sample, const std::filesystem::path& path);

FeatureSample read_embeddings(const std::filesystem::path& path);

}  // namespace fewshot
