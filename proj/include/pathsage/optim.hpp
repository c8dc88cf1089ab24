// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pathsage/encoder.hpp"
#include "pathsage/error.hpp"

namespace pathsage {

// Number of warmup steps: ceil(warmup_ratio * total_steps).
std::size_t warmup_steps(std::size_t total_steps, double warmup_ratio);

// Linear warmup 0 -> peak over the warmup steps, then linear decay to 0 at
// total_steps.
double lr_at(std::size_t step, std::size_t total_steps, double peak_lr, double warmup_ratio);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t step = 0;

  static AdamState for_parameters(std::span<const NamedTensor<T>> params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.emplace_back(p.tensor.numel(), T(0));
      s.v.emplace_back(p.tensor.numel(), T(0));
    }
    return s;
  }
};

// One bias-corrected Adam update of every parameter from its gradient
// buffer (a missing buffer counts as zero). The step counter is advanced
// first, so the first call uses t = 1.
template <typename T>
void adam_step(std::span<const NamedTensor<T>> params, AdamState<T>& state, double lr,
               const AdamOptions& options = {}) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state does not match the parameter list");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> tensor = params[i].tensor;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != tensor.numel() || v.size() != tensor.numel()) {
      throw Error(ErrorCode::kShapeMismatch, "optimizer moments for " + params[i].name +
                                                 " do not match its shape");
    }
    auto data = tensor.data();
    auto grad = std::as_const(tensor).grad();
    const bool has_grad = !grad.empty();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = has_grad ? static_cast<double>(grad[j]) : 0.0;
      const double m_new = options.beta1 * m[j] + (1.0 - options.beta1) * g;
      const double v_new = options.beta2 * v[j] + (1.0 - options.beta2) * g * g;
      m[j] = static_cast<T>(m_new);
      v[j] = static_cast<T>(v_new);
      const double m_hat = m_new / correction1;
      const double v_hat = v_new / correction2;
      data[j] = static_cast<T>(data[j] - lr * m_hat / (std::sqrt(v_hat) + options.eps));
    }
  }
}

// Global L2 norm of all gradient buffers.
template <typename T>
double grad_norm(std::span<const NamedTensor<T>> params) {
  double total = 0.0;
  for (const auto& p : params) {
    for (T g : p.tensor.grad()) total += static_cast<double>(g) * g;
  }
  return std::sqrt(total);
}

// Rescales gradients so their global norm is at most max_norm; returns the
// norm before clipping.
template <typename T>
double clip_grad_norm(std::span<const NamedTensor<T>> params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      Tensor<T> t = p.tensor;
      for (auto& g : t.grad()) g = static_cast<T>(g * factor);
    }
  }
  return norm;
}

}  // namespace pathsage
