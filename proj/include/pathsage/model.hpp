// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pathsage/encoder.hpp"
#include "pathsage/graph.hpp"
#include "pathsage/head.hpp"
#include "pathsage/sampler.hpp"

namespace pathsage {

struct ModelShape {
  std::size_t feature_dim = 0;
  std::size_t hidden = 128;
  std::size_t heads = 8;
  std::size_t layers = 2;
  std::size_t num_classes = 0;
  SamplePlan plan = SamplePlan::defaults();
  double dropout_encoder = 0.1;
  double dropout_output = 0.3;
  Task task = Task::kSingleLabel;

  void validate() const;
};

template <typename T>
struct ForwardOutput {
  Tensor<T> logits;                           // [B, num_classes]
  std::vector<AttentionMaps<T>> attention;    // per length, filled on request
};

// One shared encoder for every path length, mean pooling per length and the
// fusion head. The position table covers distances 0..depth.
template <typename T>
class PathSageModel {
 public:
  PathSageModel() = default;

  static PathSageModel init(const ModelShape& shape, std::uint64_t seed);

  const ModelShape& shape() const { return shape_; }

  // Logits for the central nodes of `batches`; every batch must follow the
  // model's sample plan. Paths of one length are encoded together.
  ForwardOutput<T> forward(Tape<T>& tape, const Graph& graph, std::span<const PathBatch> batches,
                           bool train, Rng& rng, bool capture_attention = false) const;

  // Parameters in a fixed order with stable names; tensors alias the model.
  std::vector<NamedTensor<T>> parameters() const;

  // Deep copy converted to another scalar type.
  template <typename U>
  PathSageModel<U> cast() const;

  EncoderParams<T> encoder;
  HeadParams<T> head;

 private:
  template <typename>
  friend class PathSageModel;

  ModelShape shape_;
  PositionTable positions_;
  Tensor<T> position_tensor_;
};

// Gathers node features for one path length across batches as
// [B * n_l, l + 1, F].
template <typename T>
Tensor<T> gather_path_features(const Graph& graph, std::span<const PathBatch> batches,
                               std::size_t length);

}  // namespace pathsage
