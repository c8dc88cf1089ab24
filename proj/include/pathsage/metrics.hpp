// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathsage/config.hpp"
#include "pathsage/graph.hpp"
#include "pathsage/head.hpp"
#include "pathsage/model.hpp"

namespace pathsage {

// Micro-averaged counts pooled over all classes and samples.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
};

// Predictions and truth share the Targets layout. Single-label entries are
// counted as one-hot vectors over `num_classes`.
ConfusionCounts confusion(const Targets& predictions, const Targets& truth, Task task);

// 2 tp / (2 tp + fp + fn), or 0 when the denominator is 0.
double micro_f1(const ConfusionCounts& counts);
double micro_f1(const Targets& predictions, const Targets& truth, Task task);

template <typename T>
Targets predict_rows(const Tensor<T>& logits, Task task);

struct EvalResult {
  double micro_f1 = 0.0;
  double mean_loss = 0.0;
  std::size_t nodes = 0;
};

// Inference over one split: dropout off, paths drawn from `seed`. Batches
// are fixed by cfg.batch_size and spread over cfg.workers threads; the
// result does not depend on the worker count.
EvalResult eval_split(const PathSageModel<float>& model, const Dataset& data, Split split,
                      const TrainConfig& cfg, std::uint64_t seed);

struct EvalReport {
  Split split = Split::kTest;
  std::size_t runs = 0;
  double micro_f1_mean = 0.0;
  double micro_f1_std = 0.0;  // sample standard deviation; 0 for one run
  double loss_mean = 0.0;
  std::vector<double> micro_f1_runs;
};

// eval_split with seeds seed, seed + 1, ..., seed + runs - 1.
EvalReport evaluate_runs(const PathSageModel<float>& model, const Dataset& data, Split split,
                         const TrainConfig& cfg, std::uint64_t seed, std::size_t runs);

nlohmann::json to_json(const EvalReport& report);

// "0.969±0.002"
std::string format_mean_std(double mean, double std, int digits = 3);

// One attention matrix for one sampled path, layer and head.
struct AttentionRecord {
  NodeId central = 0;
  std::vector<NodeId> path;
  std::size_t layer = 0;
  std::size_t head = 0;
  std::vector<std::vector<float>> weights;  // [(l+1) x (l+1)]
  std::vector<std::int64_t> labels;         // per token, -1 when unknown
};

nlohmann::json to_json(const AttentionRecord& record);
AttentionRecord attention_record_from_json(const nlohmann::json& j);

// Samples the node's paths, runs one inference forward and returns a record
// for every path, layer and head (ordered by length, path, layer, head).
std::vector<AttentionRecord> collect_attention(const PathSageModel<float>& model, const Dataset& data,
                                               NodeId node, std::uint64_t seed);

// collect_attention written as JSON lines; returns the record count.
std::size_t dump_attention(const PathSageModel<float>& model, const Dataset& data, NodeId node,
                           std::uint64_t seed, const std::filesystem::path& out_path);

std::vector<AttentionRecord> read_attention_records(const std::filesystem::path& path);

struct HeadAttentionStats {
  std::size_t layer = 0;
  std::size_t head = 0;
  std::size_t records = 0;
  // Mean weight over ordered token pairs i != j whose labels match / differ.
  double same_label_mean_weight = 0.0;
  double diff_label_mean_weight = 0.0;
  // Mean over query tokens with at least one same-label partner of the
  // attention mass sent to those partners, and the mass uniform attention
  // would send.
  double same_label_mass = 0.0;
  double uniform_same_label_mass = 0.0;
  std::size_t same_pairs = 0;
  std::size_t diff_pairs = 0;
};

struct AttentionStats {
  std::size_t records = 0;
  HeadAttentionStats overall;
  std::vector<HeadAttentionStats> per_head;  // sorted by (layer, head)
};

AttentionStats attention_stats(std::span<const AttentionRecord> records);
nlohmann::json to_json(const AttentionStats& stats);

}  // namespace pathsage
