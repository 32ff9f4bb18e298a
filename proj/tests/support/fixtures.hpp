#pragma once

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "fewshot/common/rng.hpp"
#include "fewshot/common/tensor.hpp"
#include "fewshot/data/synthetic.hpp"

namespace fewshot::testkit {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m({rows, cols});
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

inline LabeledDataset small_synthetic(std::size_t classes, std::size_t items, std::uint64_t seed,
                                      ImageShape shape = {3, 16, 16}, ShiftSpec shift = {}) {
  SyntheticSpec spec;
  spec.base_seed = seed;
  spec.classes = classes;
  spec.items_per_class = items;
  spec.shape = shape;
  spec.shift = shift;
  return make_synthetic_domain(spec);
}

/// Fresh empty directory under the gtest temp dir, unique per test.
inline std::filesystem::path scratch_dir(const std::string& tag = "") {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  std::filesystem::path dir = std::filesystem::path(::testing::TempDir()) / "fewshot_tests" /
                              (std::string(info->test_suite_name()) + "." + info->name() + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fewshot::testkit
