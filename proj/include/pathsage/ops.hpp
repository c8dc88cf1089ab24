// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pathsage/random.hpp"
#include "pathsage/tensor.hpp"

// Differentiable primitives. Every op records its vector-Jacobian product
// on the tape when the tape is recording and any input requires grad.
// Reductions accumulate in double regardless of T.
namespace pathsage::ops {

// [..., K] x [K, N] -> [..., N]
template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// Same shapes, or b of shape [last_dim(a)] added to every row.
template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// Elementwise product of equal shapes.
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, double factor);

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& a);

// Numerically stable softmax over the last axis.
template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& a);

// Normalizes each last-axis row to zero mean / unit variance, then applies
// gain and bias of shape [last_dim].
template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, double eps = 1e-5);

// Inverted dropout; returns `a` unchanged when !train or rate == 0.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& a, double rate, bool train, Rng& rng);

// Concatenation along the last axis; leading dims must agree.
template <typename T>
Tensor<T> concat(Tape<T>& tape, std::span<const Tensor<T>> parts);

// Treats x as rows [R, d] and averages consecutive groups of `group` rows,
// giving [R / group, d]. Each column is summed in sorted order, so the
// result does not depend on the order of rows within a group.
template <typename T>
Tensor<T> mean_groups(Tape<T>& tape, const Tensor<T>& x, std::size_t group);

// x is [N, S, d]; adds table rows 0..S-1 (table is [L, d], L >= S) to every
// sequence.
template <typename T>
Tensor<T> add_positions(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& table);

// Treats x as rows [R, d] and selects rows by index -> [len(index), d].
template <typename T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& x, std::span<const std::size_t> index);

// Multi-head scaled dot-product self-attention over q, k, v of shape
// [N, S, d]; scores are divided by sqrt(d / heads). When `weights_out` is
// non-null it receives the attention weights as [N, heads, S, S].
template <typename T>
Tensor<T> attention(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::size_t heads, std::vector<T>* weights_out = nullptr);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a);

// Mean softmax cross-entropy over the rows of logits [B, K].
template <typename T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const std::int32_t> targets);

// Mean binary cross-entropy with logits over all B x K entries; targets are
// 0/1, row-major.
template <typename T>
Tensor<T> bce_with_logits(Tape<T>& tape, const Tensor<T>& logits,
                          std::span<const std::uint8_t> targets);

}  // namespace pathsage::ops
