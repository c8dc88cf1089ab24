// SPDX-License-Identifier: Apache-2.0
#include "pathsage/encoder.hpp"

#include <cmath>

#include "pathsage/error.hpp"

namespace pathsage {

PositionTable build_position_table(std::size_t max_len, std::size_t dim) {
  if (dim % 2 != 0) {
    throw Error(ErrorCode::kOddDimension, "position table width " + std::to_string(dim) + " is odd");
  }
  PositionTable table{max_len, dim, std::vector<double>(max_len * dim)};
  for (std::size_t p = 0; p < max_len; ++p) {
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double freq = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      const double angle = static_cast<double>(p) / freq;
      table.values[p * dim + 2 * i] = std::sin(angle);
      table.values[p * dim + 2 * i + 1] = std::cos(angle);
    }
  }
  return table;
}

namespace {

template <typename T>
Tensor<T> uniform_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<T> data(fan_in * fan_out);
  for (auto& x : data) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>::from({fan_in, fan_out}, std::move(data), true);
}

template <typename T>
Tensor<T> filled(std::size_t n, T value) {
  return Tensor<T>::from({n}, std::vector<T>(n, value), true);
}

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return ops::add(tape, ops::matmul(tape, x, w), b);
}

}  // namespace

template <typename T>
EncoderParams<T> EncoderParams<T>::init(std::size_t feature_dim, std::size_t hidden,
                                        std::size_t heads, std::size_t layers, Rng& rng) {
  if (heads == 0 || hidden % heads != 0) {
    throw Error(ErrorCode::kInvalidConfig, "hidden width " + std::to_string(hidden) +
                                               " not divisible by " + std::to_string(heads) + " heads");
  }
  if (layers == 0) throw Error(ErrorCode::kInvalidConfig, "encoder needs at least one layer");
  EncoderParams p;
  p.feature_dim = feature_dim;
  p.hidden = hidden;
  p.heads = heads;
  p.input_w = uniform_weight<T>(feature_dim, hidden, rng);
  p.input_b = filled<T>(hidden, T(0));
  for (std::size_t k = 0; k < layers; ++k) {
    EncoderLayerParams<T> layer;
    layer.wq = uniform_weight<T>(hidden, hidden, rng);
    layer.bq = filled<T>(hidden, T(0));
    layer.wk = uniform_weight<T>(hidden, hidden, rng);
    layer.bk = filled<T>(hidden, T(0));
    layer.wv = uniform_weight<T>(hidden, hidden, rng);
    layer.bv = filled<T>(hidden, T(0));
    layer.wo = uniform_weight<T>(hidden, hidden, rng);
    layer.bo = filled<T>(hidden, T(0));
    layer.ff1_w = uniform_weight<T>(hidden, 4 * hidden, rng);
    layer.ff1_b = filled<T>(4 * hidden, T(0));
    layer.ff2_w = uniform_weight<T>(4 * hidden, hidden, rng);
    layer.ff2_b = filled<T>(hidden, T(0));
    layer.ln1_gain = filled<T>(hidden, T(1));
    layer.ln1_bias = filled<T>(hidden, T(0));
    layer.ln2_gain = filled<T>(hidden, T(1));
    layer.ln2_bias = filled<T>(hidden, T(0));
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename T>
void EncoderParams<T>::append_parameters(std::vector<NamedTensor<T>>& out,
                                         const std::string& prefix) const {
  out.push_back({prefix + "input.weight", input_w});
  out.push_back({prefix + "input.bias", input_b});
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    const std::string p = prefix + "layers." + std::to_string(k) + ".";
    out.push_back({p + "attn.q.weight", l.wq});
    out.push_back({p + "attn.q.bias", l.bq});
    out.push_back({p + "attn.k.weight", l.wk});
    out.push_back({p + "attn.k.bias", l.bk});
    out.push_back({p + "attn.v.weight", l.wv});
    out.push_back({p + "attn.v.bias", l.bv});
    out.push_back({p + "attn.out.weight", l.wo});
    out.push_back({p + "attn.out.bias", l.bo});
    out.push_back({p + "ffn.fc1.weight", l.ff1_w});
    out.push_back({p + "ffn.fc1.bias", l.ff1_b});
    out.push_back({p + "ffn.fc2.weight", l.ff2_w});
    out.push_back({p + "ffn.fc2.bias", l.ff2_b});
    out.push_back({p + "norm1.gain", l.ln1_gain});
    out.push_back({p + "norm1.bias", l.ln1_bias});
    out.push_back({p + "norm2.gain", l.ln2_gain});
    out.push_back({p + "norm2.bias", l.ln2_bias});
  }
}

template <typename T>
Tensor<T> encode_paths(Tape<T>& tape, const EncoderParams<T>& params, const Tensor<T>& positions,
                       const Tensor<T>& features, const EncoderOptions& options, Rng& rng,
                       AttentionMaps<T>* attention) {
  if (features.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "path features must be [N, S, F], got " +
                                               shape_string(features.shape()));
  }
  if (features.dim(2) != params.feature_dim) {
    throw Error(ErrorCode::kShapeMismatch, "feature width " + std::to_string(features.dim(2)) +
                                               " but encoder expects " +
                                               std::to_string(params.feature_dim));
  }
  const std::size_t n = features.dim(0), seq = features.dim(1);
  if (seq > positions.dim(0)) {
    throw Error(ErrorCode::kPathTooLong, std::to_string(seq) + " tokens but position table holds " +
                                             std::to_string(positions.dim(0)));
  }
  if (attention != nullptr) {
    attention->paths = n;
    attention->heads = params.heads;
    attention->seq = seq;
    attention->layers.assign(params.layers.size(), {});
  }

  Tensor<T> x = linear(tape, features, params.input_w, params.input_b);
  x = ops::add_positions(tape, x, positions);
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& layer = params.layers[k];
    Tensor<T> q = linear(tape, x, layer.wq, layer.bq);
    Tensor<T> key = linear(tape, x, layer.wk, layer.bk);
    Tensor<T> v = linear(tape, x, layer.wv, layer.bv);
    Tensor<T> ctx = ops::attention(tape, q, key, v, params.heads,
                                   attention != nullptr ? &attention->layers[k] : nullptr);
    Tensor<T> attn_out = linear(tape, ctx, layer.wo, layer.bo);
    attn_out = ops::dropout(tape, attn_out, options.dropout, options.train, rng);
    x = ops::layer_norm(tape, ops::add(tape, x, attn_out), layer.ln1_gain, layer.ln1_bias);

    Tensor<T> ff = ops::relu(tape, linear(tape, x, layer.ff1_w, layer.ff1_b));
    ff = linear(tape, ff, layer.ff2_w, layer.ff2_b);
    ff = ops::dropout(tape, ff, options.dropout, options.train, rng);
    x = ops::layer_norm(tape, ops::add(tape, x, ff), layer.ln2_gain, layer.ln2_bias);
  }

  std::vector<std::size_t> readout(n);
  for (std::size_t b = 0; b < n; ++b) readout[b] = b * seq;
  return ops::gather_rows(tape, x, readout);
}

template <typename T>
EncodedPath<T> encode_path(Tape<T>& tape, const EncoderParams<T>& params, const PositionTable& pos,
                           const Tensor<T>& path_features, const EncoderOptions& options, Rng& rng) {
  if (path_features.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "path features must be [S, F], got " +
                                               shape_string(path_features.shape()));
  }
  if (path_features.dim(0) > pos.max_len) {
    throw Error(ErrorCode::kPathTooLong, std::to_string(path_features.dim(0)) +
                                             " tokens but position table holds " +
                                             std::to_string(pos.max_len));
  }
  std::vector<T> data(path_features.data().begin(), path_features.data().end());
  auto batched = Tensor<T>::from({1, path_features.dim(0), path_features.dim(1)}, std::move(data));
  EncodedPath<T> out;
  out.repr = encode_paths(tape, params, pos.as_tensor<T>(), batched, options, rng, &out.attention);
  return out;
}

template struct EncoderParams<float>;
template struct EncoderParams<double>;

#define PATHSAGE_INSTANTIATE_ENCODER(T)                                                          \
  template Tensor<T> encode_paths(Tape<T>&, const EncoderParams<T>&, const Tensor<T>&,          \
                                  const Tensor<T>&, const EncoderOptions&, Rng&,                \
                                  AttentionMaps<T>*);                                           \
  template EncodedPath<T> encode_path(Tape<T>&, const EncoderParams<T>&, const PositionTable&,  \
                                      const Tensor<T>&, const EncoderOptions&, Rng&);

PATHSAGE_INSTANTIATE_ENCODER(float)
PATHSAGE_INSTANTIATE_ENCODER(double)

#undef PATHSAGE_INSTANTIATE_ENCODER

}  // namespace pathsage
