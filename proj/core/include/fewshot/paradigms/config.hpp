#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/model/head.hpp"

namespace fewshot {

enum class ParadigmKind { non_episodic, meta, metric };
/// Parameter groups adapted in the meta inner loop: all (MAML), head_only
/// (ANIL: omega), body_only (BOIL: theta and epsilon).
enum class InnerSubset { all, head_only, body_only };
enum class DistanceKind { sq_euclidean, cosine };

std::string to_string(ParadigmKind k);
std::string to_string(InnerSubset s);
std::string to_string(DistanceKind d);
ParadigmKind parse_paradigm_kind(std::string_view text);
InnerSubset parse_inner_subset(std::string_view text);
DistanceKind parse_distance_kind(std::string_view text);

/// Training hyperparameters for one paradigm. Optimizer fields follow SGD
/// with momentum, weight decay and per-step cosine learning-rate decay.
struct ParadigmConfig {
  ParadigmKind kind = ParadigmKind::non_episodic;
  HeadKind head = HeadKind::linear;

  std::size_t epochs = 5;
  double outer_lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  // non_episodic
  std::size_t batch_size = 128;

  // meta and metric
  std::size_t episodes_per_epoch = 2000;
  std::size_t train_way = 5;
  std::size_t train_shot = 5;
  std::size_t train_query = 15;

  // meta
  double inner_lr = 0.01;
  std::size_t inner_steps = 1;
  InnerSubset inner_subset = InnerSubset::all;
  bool second_order = false;
  std::size_t meta_batch = 4;  ///< episodes averaged per outer update

  // metric
  DistanceKind distance = DistanceKind::sq_euclidean;

  /// Per-paradigm outer learning rates: non-episodic 0.05, meta 0.001,
  /// metric 0.01.
  static ParadigmConfig defaults(ParadigmKind kind);

  /// Throws ConfigError listing every violated field.
  void validate() const;
  [[nodiscard]] std::vector<std::string> violations() const;
};

/// Test-time tuning of a fresh classifier on frozen support features.
struct TuneConfig {
  HeadKind head = HeadKind::linear;
  double lr = 0.01;
  std::size_t steps = 100;
  double weight_decay = 1e-3;
  bool reinit = true;  ///< always a new head per task

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainHistory {
  std::vector<double> loss;      ///< per-epoch mean training loss
  std::vector<double> accuracy;  ///< per-epoch training accuracy
  double initial_loss = 0.0;     ///< loss of the first step, before any update
};

}  // namespace fewshot
