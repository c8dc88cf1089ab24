// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pathsage/ops.hpp"
#include "pathsage/random.hpp"
#include "pathsage/tensor.hpp"

namespace pathsage {

// Sinusoidal position table, indexed by distance from the central node:
//   (p, 2i)   = sin(p / 10000^(2i/d))
//   (p, 2i+1) = cos(p / 10000^(2i/d))
struct PositionTable {
  std::size_t max_len = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // [max_len x dim]

  double at(std::size_t p, std::size_t j) const { return values[p * dim + j]; }

  template <typename T>
  Tensor<T> as_tensor() const {
    std::vector<T> data(values.begin(), values.end());
    return Tensor<T>::from({max_len, dim}, std::move(data));
  }
};

// Throws OddDimension when dim is odd.
PositionTable build_position_table(std::size_t max_len, std::size_t dim);

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
struct EncoderLayerParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor<T> ff1_w, ff1_b, ff2_w, ff2_b;
  Tensor<T> ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

template <typename T>
struct EncoderParams {
  std::size_t feature_dim = 0;
  std::size_t hidden = 0;
  std::size_t heads = 1;
  Tensor<T> input_w, input_b;  // [F x d], [d]
  std::vector<EncoderLayerParams<T>> layers;

  // Affine weights ~ U(+-1/sqrt(fan_in)), biases 0, layer-norm gain 1 / bias 0.
  static EncoderParams init(std::size_t feature_dim, std::size_t hidden, std::size_t heads,
                            std::size_t layers, Rng& rng);

  void append_parameters(std::vector<NamedTensor<T>>& out, const std::string& prefix) const;
};

// Attention weights captured during a forward pass: one [N, heads, S, S]
// block per encoder layer.
template <typename T>
struct AttentionMaps {
  std::size_t paths = 0;
  std::size_t heads = 0;
  std::size_t seq = 0;
  std::vector<std::vector<T>> layers;

  T weight(std::size_t layer, std::size_t path, std::size_t head, std::size_t i, std::size_t j) const {
    return layers[layer][((path * heads + head) * seq + i) * seq + j];
  }
};

struct EncoderOptions {
  double dropout = 0.1;
  bool train = false;
};

// Encodes N paths of S tokens at once. `features` is [N, S, F]; token 0 of
// every path is the central node and gets position 0. Returns the final
// layer's position-0 outputs as [N, d].
template <typename T>
Tensor<T> encode_paths(Tape<T>& tape, const EncoderParams<T>& params, const Tensor<T>& positions,
                       const Tensor<T>& features, const EncoderOptions& options, Rng& rng,
                       AttentionMaps<T>* attention = nullptr);

template <typename T>
struct EncodedPath {
  Tensor<T> repr;             // [1, d]
  AttentionMaps<T> attention;  // one path
};

// Single-path convenience over encode_paths; `path_features` is [S, F].
template <typename T>
EncodedPath<T> encode_path(Tape<T>& tape, const EncoderParams<T>& params, const PositionTable& pos,
                           const Tensor<T>& path_features, const EncoderOptions& options, Rng& rng);

}  // namespace pathsage
