// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pathsage/encoder.hpp"
#include "pathsage/graph.hpp"
#include "pathsage/ops.hpp"

namespace pathsage {

// Fusion feed-forward over the concatenated per-length means:
//   logits = relu(C W1 + b1) W2 + b2
template <typename T>
struct HeadParams {
  std::size_t depth = 0;
  std::size_t hidden = 0;
  std::size_t num_classes = 0;
  Tensor<T> w1, b1;  // [(depth * hidden) x hidden], [hidden]
  Tensor<T> w2, b2;  // [hidden x num_classes], [num_classes]

  static HeadParams init(std::size_t depth, std::size_t hidden, std::size_t num_classes, Rng& rng);
  void append_parameters(std::vector<NamedTensor<T>>& out, const std::string& prefix) const;
};

// buckets[l - 1] holds the path representations of length l for B central
// nodes, node-major: rows [b * counts[l-1], (b + 1) * counts[l-1]) belong to
// node b. Returns [B, depth * d] = mean(bucket 1) || ... || mean(bucket s).
template <typename T>
Tensor<T> aggregate(Tape<T>& tape, std::span<const Tensor<T>> buckets,
                    std::span<const std::uint32_t> counts);

// Raw logits [B, num_classes]; dropout is applied to the hidden relu layer
// when training.
template <typename T>
Tensor<T> head_forward(Tape<T>& tape, const HeadParams<T>& params, const Tensor<T>& pooled,
                       double dropout, bool train, Rng& rng);

// Per-row targets for a batch. Only the member matching the task is used.
struct Targets {
  std::vector<std::int32_t> single;  // [B]
  std::vector<std::uint8_t> multi;   // [B x K]
};

Targets gather_targets(const LabelSet& labels, std::span<const NodeId> nodes);

// Mean cross-entropy (single_label) or mean binary cross-entropy with logits
// (multi_label) over the batch.
template <typename T>
Tensor<T> loss(Tape<T>& tape, const Tensor<T>& logits, const Targets& targets, Task task);

// Argmax with the smallest index winning ties.
template <typename T>
std::int32_t predict_single(std::span<const T> logits);

// sigmoid(logit) >= 0.5, i.e. logit >= 0.
template <typename T>
std::vector<std::uint8_t> predict_multi(std::span<const T> logits);

}  // namespace pathsage
