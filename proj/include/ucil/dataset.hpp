#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "ucil/matrix.hpp"
#include "ucil/records.hpp"
#include "ucil/view_graph.hpp"

namespace ucil {

/// A full experiment dataset: records, the three view graphs over all
/// messages, a dense feature matrix, and disjoint train/val/test index sets
/// (val and test are class-balanced).
struct SplitDataset {
  std::vector<MessageRecord> records;
  std::array<ViewGraph, 3> graphs;  // hashtag, entity, user
  Matrix features;                  // N x d_in
  std::vector<int> labels;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
  int classes = 0;

  std::size_t size() const { return records.size(); }
  std::size_t feature_dim() const { return features.cols(); }

  const ViewGraph& graph(View v) const {
    return graphs[static_cast<std::size_t>(v)];
  }

  std::span<const std::size_t> split(const std::string& name) const {
    if (name == "train") return train_idx;
    if (name == "val") return val_idx;
    if (name == "test") return test_idx;
    throw std::invalid_argument("unknown split '" + name + "' (expected train|val|test)");
  }
};

namespace detail {

inline void derive_tensors(SplitDataset& ds) {
  const std::size_t n = ds.records.size();
  if (n == 0) throw std::invalid_argument("dataset: no records");
  const std::size_t d = ds.records.front().features.size();
  ds.features = Matrix(n, d);
  ds.labels.resize(n);
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = ds.records[i];
    if (r.features.size() != d) throw std::invalid_argument("dataset: ragged feature rows");
    std::copy(r.features.begin(), r.features.end(), ds.features.row(i));
    ds.labels[i] = r.label;
    max_label = std::max(max_label, r.label);
  }
  if (ds.classes == 0) ds.classes = max_label + 1;
}

inline nlohmann::json graph_to_json(const ViewGraph& g) {
  return nlohmann::json{{"view", view_name(g.view)},
                        {"offsets", g.offsets},
                        {"neighbors", g.neighbors}};
}

inline ViewGraph graph_from_json(const nlohmann::json& j, std::vector<double> timestamps) {
  ViewGraph g;
  g.view = view_from_name(j.at("view").get<std::string>());
  g.offsets = j.at("offsets").get<std::vector<int>>();
  g.neighbors = j.at("neighbors").get<std::vector<int>>();
  g.node_count = g.offsets.size() - 1;
  g.timestamps = std::move(timestamps);
  return g;
}

}  // namespace detail

/// Builds the three view graphs and dense tensors for a record list.
inline SplitDataset dataset_from_records(std::vector<MessageRecord> records,
                                         std::vector<std::size_t> train_idx,
                                         std::vector<std::size_t> val_idx,
                                         std::vector<std::size_t> test_idx, int classes = 0) {
  SplitDataset ds;
  ds.records = std::move(records);
  ds.train_idx = std::move(train_idx);
  ds.val_idx = std::move(val_idx);
  ds.test_idx = std::move(test_idx);
  ds.classes = classes;
  detail::derive_tensors(ds);
  for (View v : kAllViews)
    ds.graphs[static_cast<std::size_t>(v)] = build_view_graph(ds.records, v);
  // every class must have at least one training sample
  std::vector<std::size_t> counts(static_cast<std::size_t>(ds.classes), 0);
  for (std::size_t i : ds.train_idx) counts[static_cast<std::size_t>(ds.labels[i])] += 1;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0)
      throw std::invalid_argument("dataset: class " + std::to_string(c) +
                                  " has no training samples");
  return ds;
}

/// On-disk bundle layout: records.jsonl + splits.json + graphs.json.
inline void save_bundle(const std::filesystem::path& dir, const SplitDataset& ds,
                        const nlohmann::json& generator_config = {}) {
  std::filesystem::create_directories(dir);
  save_jsonl(dir / "records.jsonl", ds.records);

  nlohmann::json splits{{"classes", ds.classes},
                        {"train", ds.train_idx},
                        {"val", ds.val_idx},
                        {"test", ds.test_idx}};
  if (!generator_config.is_null() && !generator_config.empty())
    splits["generator"] = generator_config;
  std::ofstream sf(dir / "splits.json");
  if (!sf) throw std::runtime_error("save_bundle: cannot write splits.json");
  sf << splits.dump(2) << '\n';

  nlohmann::json graphs = nlohmann::json::array();
  for (const auto& g : ds.graphs) graphs.push_back(detail::graph_to_json(g));
  std::ofstream gf(dir / "graphs.json");
  if (!gf) throw std::runtime_error("save_bundle: cannot write graphs.json");
  gf << graphs.dump() << '\n';
}

inline SplitDataset load_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "records.jsonl"))
    throw std::runtime_error("load_bundle: " + (dir / "records.jsonl").string() + " not found");
  std::vector<MessageRecord> records = load_jsonl(dir / "records.jsonl");

  std::ifstream sf(dir / "splits.json");
  if (!sf) throw std::runtime_error("load_bundle: cannot open " + (dir / "splits.json").string());
  const nlohmann::json splits = nlohmann::json::parse(sf);

  SplitDataset ds;
  ds.records = std::move(records);
  ds.classes = splits.at("classes").get<int>();
  ds.train_idx = splits.at("train").get<std::vector<std::size_t>>();
  ds.val_idx = splits.at("val").get<std::vector<std::size_t>>();
  ds.test_idx = splits.at("test").get<std::vector<std::size_t>>();
  detail::derive_tensors(ds);

  std::vector<double> ts(ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) ts[i] = ds.records[i].timestamp;

  const auto graphs_path = dir / "graphs.json";
  if (std::filesystem::exists(graphs_path)) {
    std::ifstream gf(graphs_path);
    const nlohmann::json graphs = nlohmann::json::parse(gf);
    for (const auto& gj : graphs) {
      ViewGraph g = detail::graph_from_json(gj, ts);
      ds.graphs[static_cast<std::size_t>(g.view)] = std::move(g);
    }
  } else {
    for (View v : kAllViews)
      ds.graphs[static_cast<std::size_t>(v)] = build_view_graph(ds.records, v);
  }
  return ds;
}

}  // namespace ucil
