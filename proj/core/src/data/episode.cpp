#include "fewshot/data/episode.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "fewshot/common/error.hpp"

namespace fewshot {

std::vector<ItemRef> Episode::support_refs() const {
  std::vector<ItemRef> out;
  out.reserve(support.size());
  for (const auto& it : support) out.push_back(it.ref);
  return out;
}

std::vector<ItemRef> Episode::query_refs() const {
  std::vector<ItemRef> out;
  out.reserve(query.size());
  for (const auto& it : query) out.push_back(it.ref);
  return out;
}

std::vector<std::size_t> Episode::support_labels() const {
  std::vector<std::size_t> out;
  out.reserve(support.size());
  for (const auto& it : support) out.push_back(it.label);
  return out;
}

std::vector<std::size_t> Episode::query_labels() const {
  std::vector<std::size_t> out;
  out.reserve(query.size());
  for (const auto& it : query) out.push_back(it.label);
  return out;
}

namespace {

// First k entries of a partial Fisher-Yates shuffle of 0..n-1.
std::vector<std::size_t> choose(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

Episode sample_episode(const LabeledDataset& dataset, std::size_t way, std::size_t shot,
                       std::size_t query, Rng& rng) {
  if (way == 0 || shot == 0) throw ConfigError("episode way and shot must be >= 1");
  if (dataset.class_count() < way) {
    throw DataError("dataset '" + dataset.name() + "' has " +
                    std::to_string(dataset.class_count()) + " classes, fewer than way=" +
                    std::to_string(way));
  }
  Episode ep;
  ep.way = way;
  ep.shot = shot;
  ep.query_per_class = query;
  ep.class_map = choose(dataset.class_count(), way, rng);
  ep.support.reserve(way * shot);
  ep.query.reserve(way * query);
  for (std::size_t local = 0; local < way; ++local) {
    const std::size_t c = ep.class_map[local];
    const std::size_t available = dataset.items_in_class(c);
    if (available < shot + query) {
      throw DataError("class '" + dataset.classes()[c] + "' of dataset '" + dataset.name() +
                      "' has " + std::to_string(available) + " items, fewer than shot+query=" +
                      std::to_string(shot + query));
    }
    const auto picked = choose(available, shot + query, rng);
    for (std::size_t j = 0; j < shot; ++j) ep.support.push_back({{c, picked[j]}, local});
    for (std::size_t j = shot; j < shot + query; ++j) ep.query.push_back({{c, picked[j]}, local});
  }
  return ep;
}

std::vector<std::string> episode_violations(const Episode& ep) {
  std::vector<std::string> out;
  const std::set<std::size_t> classes(ep.class_map.begin(), ep.class_map.end());
  if (ep.class_map.size() != ep.way || classes.size() != ep.way) {
    out.push_back("class_map is not a bijection onto " + std::to_string(ep.way) + " classes");
  }
  std::vector<std::size_t> support_count(ep.way, 0);
  std::vector<std::size_t> query_count(ep.way, 0);
  std::set<ItemRef> support_items;
  auto check_item = [&](const EpisodeItem& it, std::vector<std::size_t>& counts, const char* set) {
    if (it.label >= ep.way) {
      out.push_back(std::string(set) + " label " + std::to_string(it.label) + " outside [0, way)");
      return;
    }
    ++counts[it.label];
    if (ep.class_map.size() == ep.way && ep.class_map[it.label] != it.ref.class_index) {
      out.push_back(std::string(set) + " item label does not map to its global class");
    }
  };
  for (const auto& it : ep.support) {
    check_item(it, support_count, "support");
    if (!support_items.insert(it.ref).second) out.push_back("duplicate support item");
  }
  std::set<ItemRef> query_items;
  for (const auto& it : ep.query) {
    check_item(it, query_count, "query");
    if (support_items.count(it.ref)) out.push_back("query item also in support set");
    if (!query_items.insert(it.ref).second) out.push_back("duplicate query item");
  }
  for (std::size_t l = 0; l < ep.way; ++l) {
    if (support_count[l] != ep.shot) {
      out.push_back("label " + std::to_string(l) + " has " + std::to_string(support_count[l]) +
                    " support items, expected " + std::to_string(ep.shot));
    }
    if (query_count[l] != ep.query_per_class) {
      out.push_back("label " + std::to_string(l) + " has " + std::to_string(query_count[l]) +
                    " query items, expected " + std::to_string(ep.query_per_class));
    }
  }
  return out;
}

std::vector<Batch> sample_batches(const LabeledDataset& dataset, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  auto order = dataset.all_items();
  if (order.empty()) throw DataError("dataset '" + dataset.name() + "' is empty");
  rng.shuffle(std::span<ItemRef>(order));
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    const std::size_t end = std::min(order.size(), start + batch_size);
    b.items.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& r : b.items) b.labels.push_back(r.class_index);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace fewshot
