// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace pathsage {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

enum class Task { kSingleLabel, kMultiLabel };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

// Dense row-major [rows x cols] matrix of 32-bit features.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  bool operator==(const FeatureMatrix&) const = default;
};

// Immutable CSR adjacency plus node features. Every node has degree >= 1
// once constructed through from_edges (isolated nodes receive a self-loop).
class Graph {
 public:
  Graph() = default;

  // Builds the CSR. Undirected graphs are symmetrized; neighbor lists are
  // sorted ascending and de-duplicated.
  static Graph from_edges(std::size_t num_nodes, std::span<const Edge> edges,
                          FeatureMatrix features, bool directed);

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const { return neighbors_.size(); }
  std::size_t feature_dim() const { return features_.cols; }
  bool directed() const { return directed_; }

  // Throws IndexOutOfRange when u >= num_nodes().
  std::span<const NodeId> neighbors_of(NodeId u) const;
  std::size_t degree(NodeId u) const { return neighbors_of(u).size(); }
  bool has_edge(NodeId u, NodeId v) const;

  std::span<const std::uint64_t> offsets() const { return offsets_; }
  std::span<const NodeId> neighbors() const { return neighbors_; }
  const FeatureMatrix& features() const { return features_; }

  bool operator==(const Graph&) const = default;

 private:
  std::vector<std::uint64_t> offsets_;
  std::vector<NodeId> neighbors_;
  FeatureMatrix features_;
  bool directed_ = false;
};

struct LabelSet {
  Task task = Task::kSingleLabel;
  std::size_t num_classes = 0;
  // single_label: one class index per node.
  std::vector<std::int32_t> single;
  // multi_label: row-major [num_nodes x num_classes] of 0/1.
  std::vector<std::uint8_t> multi;

  std::span<const std::uint8_t> multi_row(NodeId u) const {
    return {multi.data() + static_cast<std::size_t>(u) * num_classes, num_classes};
  }
  bool operator==(const LabelSet&) const = default;
};

struct SplitMasks {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  bool operator==(const SplitMasks&) const = default;
};

enum class Split { kTrain, kVal, kTest };
Split parse_split(std::string_view text);
std::string_view to_string(Split split);

struct Dataset {
  Graph graph;
  LabelSet labels;
  SplitMasks splits;

  std::span<const NodeId> nodes(Split split) const;
  bool operator==(const Dataset&) const = default;
};

struct DatasetMeta {
  std::uint64_t num_nodes = 0;
  std::uint64_t feature_dim = 0;
  std::uint64_t num_classes = 0;
  Task task = Task::kSingleLabel;
  bool directed = false;
};

// Reads meta.json, edges.csv, features.bin, labels.csv and splits.json.
Dataset load_dataset(const std::filesystem::path& dir);

// Writers for the on-disk layout; load_dataset reads what these produce.
void write_meta(const std::filesystem::path& file, const DatasetMeta& meta);
void write_edges(const std::filesystem::path& file, std::span<const Edge> edges);
void write_features(const std::filesystem::path& file, const FeatureMatrix& features);
FeatureMatrix read_features(const std::filesystem::path& file);
void write_labels(const std::filesystem::path& file, const LabelSet& labels);
void write_splits(const std::filesystem::path& file, const SplitMasks& splits);

}  // namespace pathsage
