// SPDX-License-Identifier: Apache-2.0
#include "pathsage/model.hpp"

#include <algorithm>
#include <string>

#include "pathsage/error.hpp"

namespace pathsage {

void ModelShape::validate() const {
  plan.validate();
  if (feature_dim == 0) throw Error(ErrorCode::kInvalidConfig, "feature_dim must be positive");
  if (num_classes == 0) throw Error(ErrorCode::kInvalidConfig, "num_classes must be positive");
  if (hidden == 0 || hidden % 2 != 0) {
    throw Error(ErrorCode::kOddDimension, "hidden width must be even and positive");
  }
  if (heads == 0 || hidden % heads != 0) {
    throw Error(ErrorCode::kInvalidConfig, "hidden width " + std::to_string(hidden) +
                                               " not divisible by " + std::to_string(heads) + " heads");
  }
  if (layers == 0) throw Error(ErrorCode::kInvalidConfig, "at least one encoder layer required");
  for (double rate : {dropout_encoder, dropout_output}) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::kInvalidConfig, "dropout must lie in [0, 1)");
  }
}

template <typename T>
PathSageModel<T> PathSageModel<T>::init(const ModelShape& shape, std::uint64_t seed) {
  shape.validate();
  Rng rng(splitmix64(seed ^ 0x1D17ull));
  PathSageModel m;
  m.shape_ = shape;
  m.encoder = EncoderParams<T>::init(shape.feature_dim, shape.hidden, shape.heads, shape.layers, rng);
  m.head = HeadParams<T>::init(shape.plan.depth(), shape.hidden, shape.num_classes, rng);
  m.positions_ = build_position_table(shape.plan.depth() + 1, shape.hidden);
  m.position_tensor_ = m.positions_.template as_tensor<T>();
  return m;
}

template <typename T>
std::vector<NamedTensor<T>> PathSageModel<T>::parameters() const {
  std::vector<NamedTensor<T>> out;
  encoder.append_parameters(out, "encoder.");
  head.append_parameters(out, "head.");
  return out;
}

template <typename T>
template <typename U>
PathSageModel<U> PathSageModel<T>::cast() const {
  PathSageModel<U> m = PathSageModel<U>::init(shape_, 0);
  auto src = parameters();
  auto dst = m.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto from = src[i].tensor.data();
    auto to = dst[i].tensor.data();
    std::transform(from.begin(), from.end(), to.begin(), [](T x) { return static_cast<U>(x); });
  }
  return m;
}

template <typename T>
Tensor<T> gather_path_features(const Graph& graph, std::span<const PathBatch> batches,
                               std::size_t length) {
  const std::size_t feature_dim = graph.feature_dim();
  const std::size_t seq = length + 1;
  std::size_t total = 0;
  for (const auto& b : batches) total += b.bucket(length).size();
  std::vector<T> data;
  data.reserve(total * seq * feature_dim);
  for (const auto& b : batches) {
    for (NodeId u : b.bucket(length).nodes) {
      auto row = graph.features().row(u);
      for (float v : row) data.push_back(static_cast<T>(v));
    }
  }
  return Tensor<T>::from({total, seq, feature_dim}, std::move(data));
}

template <typename T>
ForwardOutput<T> PathSageModel<T>::forward(Tape<T>& tape, const Graph& graph,
                                           std::span<const PathBatch> batches, bool train, Rng& rng,
                                           bool capture_attention) const {
  if (batches.empty()) throw Error(ErrorCode::kEmptyBucket, "forward over zero central nodes");
  if (graph.feature_dim() != shape_.feature_dim) {
    throw Error(ErrorCode::kShapeMismatch, "graph feature width " + std::to_string(graph.feature_dim()) +
                                               " vs model " + std::to_string(shape_.feature_dim));
  }
  const SamplePlan& plan = shape_.plan;
  for (const auto& b : batches) {
    if (b.buckets.size() != plan.depth()) {
      throw Error(ErrorCode::kInvalidPlan, "path batch depth " + std::to_string(b.buckets.size()) +
                                               " but model depth " + std::to_string(plan.depth()));
    }
    for (std::size_t l = 1; l <= plan.depth(); ++l) {
      const auto& bucket = b.bucket(l);
      if (bucket.length != l || bucket.size() != plan.count(l)) {
        throw Error(ErrorCode::kInvalidPlan, "bucket " + std::to_string(l) + " does not match the sample plan");
      }
    }
  }

  ForwardOutput<T> out;
  if (capture_attention) out.attention.resize(plan.depth());
  const EncoderOptions options{shape_.dropout_encoder, train};
  std::vector<Tensor<T>> reprs;
  reprs.reserve(plan.depth());
  for (std::size_t l = 1; l <= plan.depth(); ++l) {
    Tensor<T> features = gather_path_features<T>(graph, batches, l);
    reprs.push_back(encode_paths(tape, encoder, position_tensor_, features, options, rng,
                                 capture_attention ? &out.attention[l - 1] : nullptr));
  }
  Tensor<T> pooled = aggregate<T>(tape, reprs, plan.counts);
  out.logits = head_forward(tape, head, pooled, shape_.dropout_output, train, rng);
  return out;
}

template class PathSageModel<float>;
template class PathSageModel<double>;
template PathSageModel<double> PathSageModel<float>::cast<double>() const;
template PathSageModel<float> PathSageModel<double>::cast<float>() const;
template PathSageModel<float> PathSageModel<float>::cast<float>() const;
template PathSageModel<double> PathSageModel<double>::cast<double>() const;
template Tensor<float> gather_path_features(const Graph&, std::span<const PathBatch>, std::size_t);
template Tensor<double> gather_path_features(const Graph&, std::span<const PathBatch>, std::size_t);

}  // namespace pathsage
