// SPDX-License-Identifier: Apache-2.0
#include "pathsage/head.hpp"

#include <cmath>

#include "pathsage/error.hpp"

namespace pathsage {

template <typename T>
HeadParams<T> HeadParams<T>::init(std::size_t depth, std::size_t hidden, std::size_t num_classes,
                                  Rng& rng) {
  HeadParams p;
  p.depth = depth;
  p.hidden = hidden;
  p.num_classes = num_classes;
  auto weight = [&rng](std::size_t fan_in, std::size_t fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<T> data(fan_in * fan_out);
    for (auto& x : data) x = static_cast<T>(rng.uniform(-bound, bound));
    return Tensor<T>::from({fan_in, fan_out}, std::move(data), true);
  };
  p.w1 = weight(depth * hidden, hidden);
  p.b1 = Tensor<T>::zeros({hidden}, true);
  p.w2 = weight(hidden, num_classes);
  p.b2 = Tensor<T>::zeros({num_classes}, true);
  return p;
}

template <typename T>
void HeadParams<T>::append_parameters(std::vector<NamedTensor<T>>& out,
                                      const std::string& prefix) const {
  out.push_back({prefix + "fc1.weight", w1});
  out.push_back({prefix + "fc1.bias", b1});
  out.push_back({prefix + "fc2.weight", w2});
  out.push_back({prefix + "fc2.bias", b2});
}

template <typename T>
Tensor<T> aggregate(Tape<T>& tape, std::span<const Tensor<T>> buckets,
                    std::span<const std::uint32_t> counts) {
  if (buckets.empty() || buckets.size() != counts.size()) {
    throw Error(ErrorCode::kEmptyBucket, std::to_string(buckets.size()) + " buckets for " +
                                             std::to_string(counts.size()) + " path lengths");
  }
  std::vector<Tensor<T>> means;
  means.reserve(buckets.size());
  std::size_t width = 0, batch = 0;
  for (std::size_t l = 0; l < buckets.size(); ++l) {
    const auto& bucket = buckets[l];
    if (counts[l] == 0 || !bucket.defined() || bucket.numel() == 0) {
      throw Error(ErrorCode::kEmptyBucket, "no paths of length " + std::to_string(l + 1));
    }
    if (bucket.rank() != 2) {
      throw Error(ErrorCode::kWidthMismatch, "bucket tensors must be [rows, d], got " +
                                                 shape_string(bucket.shape()));
    }
    if (l == 0) width = bucket.dim(1);
    if (bucket.dim(1) != width) {
      throw Error(ErrorCode::kWidthMismatch, "bucket " + std::to_string(l + 1) + " has width " +
                                                 std::to_string(bucket.dim(1)) + ", expected " +
                                                 std::to_string(width));
    }
    if (bucket.dim(0) % counts[l] != 0) {
      throw Error(ErrorCode::kEmptyBucket, "bucket " + std::to_string(l + 1) + " rows " +
                                               std::to_string(bucket.dim(0)) +
                                               " not a multiple of " + std::to_string(counts[l]));
    }
    const std::size_t b = bucket.dim(0) / counts[l];
    if (l == 0) batch = b;
    if (b != batch) {
      throw Error(ErrorCode::kEmptyBucket, "buckets disagree on the number of central nodes");
    }
    means.push_back(ops::mean_groups(tape, bucket, counts[l]));
  }
  return ops::concat<T>(tape, means);
}

template <typename T>
Tensor<T> head_forward(Tape<T>& tape, const HeadParams<T>& params, const Tensor<T>& pooled,
                       double dropout, bool train, Rng& rng) {
  if (pooled.rank() != 2 || pooled.dim(1) != params.w1.dim(0)) {
    throw Error(ErrorCode::kWidthMismatch, "pooled input " + shape_string(pooled.shape()) +
                                               " vs fc1 " + shape_string(params.w1.shape()));
  }
  Tensor<T> hidden = ops::relu(tape, ops::add(tape, ops::matmul(tape, pooled, params.w1), params.b1));
  hidden = ops::dropout(tape, hidden, dropout, train, rng);
  return ops::add(tape, ops::matmul(tape, hidden, params.w2), params.b2);
}

Targets gather_targets(const LabelSet& labels, std::span<const NodeId> nodes) {
  Targets t;
  if (labels.task == Task::kSingleLabel) {
    t.single.reserve(nodes.size());
    for (NodeId u : nodes) t.single.push_back(labels.single.at(u));
  } else {
    t.multi.reserve(nodes.size() * labels.num_classes);
    for (NodeId u : nodes) {
      auto row = labels.multi_row(u);
      t.multi.insert(t.multi.end(), row.begin(), row.end());
    }
  }
  return t;
}

template <typename T>
Tensor<T> loss(Tape<T>& tape, const Tensor<T>& logits, const Targets& targets, Task task) {
  if (task == Task::kSingleLabel) return ops::cross_entropy(tape, logits, targets.single);
  return ops::bce_with_logits(tape, logits, targets.multi);
}

template <typename T>
std::int32_t predict_single(std::span<const T> logits) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  return static_cast<std::int32_t>(best);
}

template <typename T>
std::vector<std::uint8_t> predict_multi(std::span<const T> logits) {
  std::vector<std::uint8_t> out(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) out[c] = logits[c] >= T(0) ? 1 : 0;
  return out;
}

template struct HeadParams<float>;
template struct HeadParams<double>;

#define PATHSAGE_INSTANTIATE_HEAD(T)                                                             \
  template Tensor<T> aggregate(Tape<T>&, std::span<const Tensor<T>>,                            \
                               std::span<const std::uint32_t>);                                 \
  template Tensor<T> head_forward(Tape<T>&, const HeadParams<T>&, const Tensor<T>&, double,     \
                                  bool, Rng&);                                                  \
  template Tensor<T> loss(Tape<T>&, const Tensor<T>&, const Targets&, Task);                    \
  template std::int32_t predict_single(std::span<const T>);                                     \
  template std::vector<std::uint8_t> predict_multi(std::span<const T>);

PATHSAGE_INSTANTIATE_HEAD(float)
PATHSAGE_INSTANTIATE_HEAD(double)

#undef PATHSAGE_INSTANTIATE_HEAD

}  // namespace pathsage
