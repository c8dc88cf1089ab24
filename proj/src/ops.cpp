// SPDX-License-Identifier: Apache-2.0
#include "pathsage/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace pathsage {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

namespace ops {
namespace {

template <typename T, typename... Rest>
bool track(const Tape<T>& tape, const Tensor<T>& first, const Rest&... rest) {
  if (!tape.recording()) return false;
  return (first.requires_grad() || ... || rest.requires_grad());
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::kShapeMismatch,
              std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
}

template <typename T>
std::size_t rows_of(const Tensor<T>& t) {
  return t.numel() / std::max<std::size_t>(t.last_dim(), 1);
}

Shape with_last(Shape shape, std::size_t last) {
  if (shape.empty()) return {last};
  shape.back() = last;
  return shape;
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (b.rank() != 2 || a.rank() == 0 || a.last_dim() != b.dim(0)) {
    shape_mismatch("matmul", a.shape(), b.shape());
  }
  const std::size_t rows = rows_of(a), inner = b.dim(0), cols = b.dim(1);
  auto out = Tensor<T>::zeros(with_last(a.shape(), cols), track(tape, a, b));
  {
    auto A = a.data();
    auto B = b.data();
    auto C = out.data();
    std::vector<double> acc(cols);
    for (std::size_t i = 0; i < rows; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t k = 0; k < inner; ++k) {
        const double aik = A[i * inner + k];
        if (aik == 0.0) continue;  // ReLU outputs are often zero
        const T* brow = &B[k * cols];
        for (std::size_t j = 0; j < cols; ++j) acc[j] += aik * static_cast<double>(brow[j]);
      }
      for (std::size_t j = 0; j < cols; ++j) C[i * cols + j] = static_cast<T>(acc[j]);
    }
  }
  if (out.requires_grad()) {
    tape.record([a, b, out, rows, inner, cols]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto A = std::as_const(a).data();
      auto B = std::as_const(b).data();
      if (a.requires_grad()) {
        auto dA = a.ensure_grad();
        // dA = G B^T, summed over j in ascending order for every entry.
        std::vector<double> bt(cols * inner);
        for (std::size_t k = 0; k < inner; ++k) {
          for (std::size_t j = 0; j < cols; ++j) bt[j * inner + k] = B[k * cols + j];
        }
        std::vector<double> acc(inner);
        for (std::size_t i = 0; i < rows; ++i) {
          std::fill(acc.begin(), acc.end(), 0.0);
          for (std::size_t j = 0; j < cols; ++j) {
            const double g = G[i * cols + j];
            if (g == 0.0) continue;
            const double* row = &bt[j * inner];
            for (std::size_t k = 0; k < inner; ++k) acc[k] += g * row[k];
          }
          for (std::size_t k = 0; k < inner; ++k) dA[i * inner + k] += static_cast<T>(acc[k]);
        }
      }
      if (b.requires_grad()) {
        auto dB = b.ensure_grad();
        std::vector<double> acc(inner * cols, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t k = 0; k < inner; ++k) {
            const double aik = A[i * inner + k];
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) acc[k * cols + j] += aik * G[i * cols + j];
          }
        }
        for (std::size_t idx = 0; idx < acc.size(); ++idx) dB[idx] += static_cast<T>(acc[idx]);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  const bool same = a.shape() == b.shape();
  const bool bias = !same && b.rank() == 1 && a.rank() >= 1 && b.dim(0) == a.last_dim();
  if (!same && !bias) shape_mismatch("add", a.shape(), b.shape());
  auto out = Tensor<T>::zeros(a.shape(), track(tape, a, b));
  const std::size_t n = a.numel(), width = b.numel();
  {
    auto A = a.data();
    auto B = b.data();
    auto C = out.data();
    if (same) {
      for (std::size_t i = 0; i < n; ++i) C[i] = A[i] + B[i];
    } else {
      for (std::size_t r = 0; r < n; r += width) {
        for (std::size_t j = 0; j < width; ++j) C[r + j] = A[r + j] + B[j];
      }
    }
  }
  if (out.requires_grad()) {
    tape.record([a, b, out, n, width, same]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      if (a.requires_grad()) {
        auto dA = a.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) dA[i] += G[i];
      }
      if (b.requires_grad()) {
        auto dB = b.ensure_grad();
        if (same) {
          for (std::size_t i = 0; i < n; ++i) dB[i] += G[i];
        } else {
          std::vector<double> acc(width, 0.0);
          for (std::size_t r = 0; r < n; r += width) {
            for (std::size_t j = 0; j < width; ++j) acc[j] += G[r + j];
          }
          for (std::size_t j = 0; j < width; ++j) dB[j] += static_cast<T>(acc[j]);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_mismatch("mul", a.shape(), b.shape());
  auto out = Tensor<T>::zeros(a.shape(), track(tape, a, b));
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (out.requires_grad()) {
    tape.record([a, b, out, n]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      if (a.requires_grad()) {
        auto dA = a.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) dA[i] += G[i] * std::as_const(b).data()[i];
      }
      if (b.requires_grad()) {
        auto dB = b.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) dB[i] += G[i] * std::as_const(a).data()[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, double factor) {
  auto out = Tensor<T>::zeros(a.shape(), track(tape, a));
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = static_cast<T>(a.data()[i] * factor);
  if (out.requires_grad()) {
    tape.record([a, out, n, factor]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto dA = a.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) dA[i] += static_cast<T>(G[i] * factor);
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& a) {
  auto out = Tensor<T>::zeros(a.shape(), track(tape, a));
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::max(a.data()[i], T(0));
  if (out.requires_grad()) {
    tape.record([a, out, n]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto dA = a.ensure_grad();
      auto A = std::as_const(a).data();
      for (std::size_t i = 0; i < n; ++i) {
        if (A[i] > T(0)) dA[i] += G[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& a) {
  if (a.rank() == 0) throw Error(ErrorCode::kInvalidAxis, "softmax needs at least one axis");
  const std::size_t width = a.last_dim(), rows = rows_of(a);
  auto out = Tensor<T>::zeros(a.shape(), track(tape, a));
  auto A = a.data();
  auto Y = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = &A[r * width];
    T* y = &Y[r * width];
    double mx = *std::max_element(x, x + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) total += std::exp(x[j] - mx);
    for (std::size_t j = 0; j < width; ++j) y[j] = static_cast<T>(std::exp(x[j] - mx) / total);
  }
  if (out.requires_grad()) {
    tape.record([a, out, rows, width]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto Y = std::as_const(out).data();
      auto dA = a.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < width; ++j) dot += static_cast<double>(G[r * width + j]) * Y[r * width + j];
        for (std::size_t j = 0; j < width; ++j) {
          dA[r * width + j] += static_cast<T>(Y[r * width + j] * (G[r * width + j] - dot));
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, double eps) {
  if (x.rank() == 0) throw Error(ErrorCode::kInvalidAxis, "layer_norm needs at least one axis");
  const std::size_t width = x.last_dim(), rows = rows_of(x);
  if (gain.shape() != Shape{width}) shape_mismatch("layer_norm gain", x.shape(), gain.shape());
  if (bias.shape() != Shape{width}) shape_mismatch("layer_norm bias", x.shape(), bias.shape());
  auto out = Tensor<T>::zeros(x.shape(), track(tape, x, gain, bias));
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  auto X = x.data();
  auto Y = out.data();
  auto gamma = gain.data();
  auto beta = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < width; ++j) mean += X[r * width + j];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      double d = X[r * width + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(width);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) {
      double h = (X[r * width + j] - mean) * inv_std[r];
      xhat[r * width + j] = h;
      Y[r * width + j] = static_cast<T>(h * gamma[j] + beta[j]);
    }
  }
  if (out.requires_grad()) {
    tape.record([x, gain, bias, out, rows, width, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto gamma = std::as_const(gain).data();
      if (gain.requires_grad() || bias.requires_grad()) {
        std::vector<double> dg(width, 0.0), db(width, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < width; ++j) {
            dg[j] += static_cast<double>(G[r * width + j]) * xhat[r * width + j];
            db[j] += G[r * width + j];
          }
        }
        if (gain.requires_grad()) {
          auto dG = gain.ensure_grad();
          for (std::size_t j = 0; j < width; ++j) dG[j] += static_cast<T>(dg[j]);
        }
        if (bias.requires_grad()) {
          auto dB = bias.ensure_grad();
          for (std::size_t j = 0; j < width; ++j) dB[j] += static_cast<T>(db[j]);
        }
      }
      if (x.requires_grad()) {
        auto dX = x.ensure_grad();
        std::vector<double> dh(width);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t j = 0; j < width; ++j) {
            dh[j] = static_cast<double>(G[r * width + j]) * gamma[j];
            mean_dh += dh[j];
            mean_dh_h += dh[j] * xhat[r * width + j];
          }
          mean_dh /= static_cast<double>(width);
          mean_dh_h /= static_cast<double>(width);
          for (std::size_t j = 0; j < width; ++j) {
            dX[r * width + j] += static_cast<T>(
                inv_std[r] * (dh[j] - mean_dh - xhat[r * width + j] * mean_dh_h));
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& a, double rate, bool train, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "dropout rate must lie in [0, 1)");
  }
  if (!train || rate == 0.0) return a;
  const std::size_t n = a.numel();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<T> mask(n);
  for (std::size_t i = 0; i < n; ++i) mask[i] = rng.uniform() < rate ? T(0) : static_cast<T>(keep_scale);
  auto out = Tensor<T>::zeros(a.shape(), track(tape, a));
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * mask[i];
  if (out.requires_grad()) {
    tape.record([a, out, n, mask = std::move(mask)]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto dA = a.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) dA[i] += G[i] * mask[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(Tape<T>& tape, std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat of zero tensors");
  Shape lead = parts[0].shape();
  if (lead.empty()) throw Error(ErrorCode::kInvalidAxis, "concat needs at least one axis");
  lead.pop_back();
  std::size_t total = 0;
  bool needs_grad = false;
  for (const auto& p : parts) {
    Shape pl = p.shape();
    if (pl.empty()) throw Error(ErrorCode::kInvalidAxis, "concat needs at least one axis");
    pl.pop_back();
    if (pl != lead) shape_mismatch("concat", parts[0].shape(), p.shape());
    total += p.last_dim();
    needs_grad = needs_grad || p.requires_grad();
  }
  const std::size_t rows = numel_of(lead);
  Shape shape = lead;
  shape.push_back(total);
  auto out = Tensor<T>::zeros(shape, tape.recording() && needs_grad);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.last_dim();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(&p.data()[r * w], w, &out.data()[r * total + offset]);
    }
    offset += w;
  }
  if (out.requires_grad()) {
    std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
    tape.record([inputs = std::move(inputs), out, rows, total]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      std::size_t offset = 0;
      for (auto& p : inputs) {
        const std::size_t w = p.last_dim();
        if (p.requires_grad()) {
          auto dP = p.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < w; ++j) dP[r * w + j] += G[r * total + offset + j];
          }
        }
        offset += w;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean_groups(Tape<T>& tape, const Tensor<T>& x, std::size_t group) {
  if (x.rank() == 0) throw Error(ErrorCode::kInvalidAxis, "mean_groups needs at least one axis");
  const std::size_t width = x.last_dim(), rows = rows_of(x);
  if (group == 0 || rows % group != 0) {
    throw Error(ErrorCode::kShapeMismatch, "mean_groups: " + std::to_string(rows) +
                                               " rows not divisible into groups of " +
                                               std::to_string(group));
  }
  const std::size_t groups = rows / group;
  auto out = Tensor<T>::zeros({groups, width}, track(tape, x));
  auto X = x.data();
  std::vector<T> column(group);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t j = 0; j < width; ++j) {
      for (std::size_t i = 0; i < group; ++i) column[i] = X[(g * group + i) * width + j];
      std::sort(column.begin(), column.end());
      double s = 0.0;
      for (T v : column) s += v;
      out.data()[g * width + j] = static_cast<T>(s / static_cast<double>(group));
    }
  }
  if (out.requires_grad()) {
    tape.record([x, out, groups, group, width]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto dX = x.ensure_grad();
      const double inv = 1.0 / static_cast<double>(group);
      for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t i = 0; i < group; ++i) {
          for (std::size_t j = 0; j < width; ++j) {
            dX[(g * group + i) * width + j] += static_cast<T>(G[g * width + j] * inv);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_positions(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& table) {
  if (x.rank() != 3 || table.rank() != 2 || table.dim(1) != x.dim(2) || table.dim(0) < x.dim(1)) {
    shape_mismatch("add_positions", x.shape(), table.shape());
  }
  const std::size_t n = x.dim(0), seq = x.dim(1), width = x.dim(2);
  auto out = Tensor<T>::zeros(x.shape(), track(tape, x, table));
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t t = 0; t < seq; ++t) {
      for (std::size_t j = 0; j < width; ++j) {
        const std::size_t idx = (b * seq + t) * width + j;
        out.data()[idx] = x.data()[idx] + table.data()[t * width + j];
      }
    }
  }
  if (out.requires_grad()) {
    tape.record([x, table, out, n, seq, width]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      if (x.requires_grad()) {
        auto dX = x.ensure_grad();
        for (std::size_t i = 0; i < G.size(); ++i) dX[i] += G[i];
      }
      if (table.requires_grad()) {
        auto dT = table.ensure_grad();
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t i = 0; i < seq * width; ++i) dT[i] += G[b * seq * width + i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& x, std::span<const std::size_t> index) {
  if (x.rank() == 0) throw Error(ErrorCode::kInvalidAxis, "gather_rows needs at least one axis");
  const std::size_t width = x.last_dim(), rows = rows_of(x);
  for (std::size_t r : index) {
    if (r >= rows) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "gather_rows: row " + std::to_string(r) + " of " + std::to_string(rows));
    }
  }
  auto out = Tensor<T>::zeros({index.size(), width}, track(tape, x));
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::copy_n(&x.data()[index[i] * width], width, &out.data()[i * width]);
  }
  if (out.requires_grad()) {
    std::vector<std::size_t> idx(index.begin(), index.end());
    tape.record([x, out, width, idx = std::move(idx)]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto dX = x.ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) dX[idx[i] * width + j] += G[i * width + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> attention(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::size_t heads, std::vector<T>* weights_out) {
  if (q.rank() != 3) throw Error(ErrorCode::kShapeMismatch, "attention expects [N, S, d], got " + shape_string(q.shape()));
  if (k.shape() != q.shape()) shape_mismatch("attention k", q.shape(), k.shape());
  if (v.shape() != q.shape()) shape_mismatch("attention v", q.shape(), v.shape());
  const std::size_t n = q.dim(0), seq = q.dim(1), width = q.dim(2);
  if (heads == 0 || width % heads != 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "width " + std::to_string(width) + " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t hd = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  auto out = Tensor<T>::zeros(q.shape(), track(tape, q, k, v));
  std::vector<T> probs(n * heads * seq * seq);
  auto Q = q.data();
  auto K = k.data();
  auto V = v.data();
  auto C = out.data();
  std::vector<double> scores(seq);
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t base = b * seq * width;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t col = h * hd;
      for (std::size_t i = 0; i < seq; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < seq; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) {
            s += static_cast<double>(Q[base + i * width + col + c]) * K[base + j * width + col + c];
          }
          scores[j] = s * inv_sqrt;
          mx = std::max(mx, scores[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < seq; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          total += scores[j];
        }
        T* p = &probs[((b * heads + h) * seq + i) * seq];
        for (std::size_t j = 0; j < seq; ++j) p[j] = static_cast<T>(scores[j] / total);
        for (std::size_t c = 0; c < hd; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < seq; ++j) acc += static_cast<double>(p[j]) * V[base + j * width + col + c];
          C[base + i * width + col + c] = static_cast<T>(acc);
        }
      }
    }
  }
  if (weights_out != nullptr) *weights_out = probs;
  if (out.requires_grad()) {
    tape.record([q, k, v, out, n, seq, width, heads, hd, inv_sqrt,
                 probs = std::move(probs)]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto Q = std::as_const(q).data();
      auto K = std::as_const(k).data();
      auto V = std::as_const(v).data();
      std::vector<double> dq(q.numel(), 0.0), dk(k.numel(), 0.0), dv(v.numel(), 0.0);
      std::vector<double> dp(seq), ds(seq);
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t base = b * seq * width;
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t col = h * hd;
          for (std::size_t i = 0; i < seq; ++i) {
            const T* p = &probs[((b * heads + h) * seq + i) * seq];
            double dot = 0.0;
            for (std::size_t j = 0; j < seq; ++j) {
              double s = 0.0;
              for (std::size_t c = 0; c < hd; ++c) {
                const double g = G[base + i * width + col + c];
                s += g * V[base + j * width + col + c];
                dv[base + j * width + col + c] += static_cast<double>(p[j]) * g;
              }
              dp[j] = s;
              dot += s * p[j];
            }
            for (std::size_t j = 0; j < seq; ++j) ds[j] = p[j] * (dp[j] - dot) * inv_sqrt;
            for (std::size_t j = 0; j < seq; ++j) {
              for (std::size_t c = 0; c < hd; ++c) {
                dq[base + i * width + col + c] += ds[j] * K[base + j * width + col + c];
                dk[base + j * width + col + c] += ds[j] * Q[base + i * width + col + c];
              }
            }
          }
        }
      }
      auto flush = [](const Tensor<T>& t, const std::vector<double>& d) {
        if (!t.requires_grad()) return;
        auto g = t.ensure_grad();
        for (std::size_t i = 0; i < d.size(); ++i) g[i] += static_cast<T>(d[i]);
      };
      flush(q, dq);
      flush(k, dk);
      flush(v, dv);
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a) {
  auto out = Tensor<T>::zeros({}, track(tape, a));
  double s = 0.0;
  for (T x : a.data()) s += x;
  out.data()[0] = static_cast<T>(s);
  if (out.requires_grad()) {
    tape.record([a, out]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto dA = a.ensure_grad();
      for (auto& g : dA) g += G[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const std::int32_t> targets) {
  if (logits.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "cross_entropy expects [B, K]");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != batch) {
    throw Error(ErrorCode::kInvalidTarget, std::to_string(targets.size()) + " targets for " +
                                               std::to_string(batch) + " rows");
  }
  for (auto t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw Error(ErrorCode::kInvalidTarget, "class " + std::to_string(t) + " outside [0," +
                                                 std::to_string(classes) + ")");
    }
  }
  auto out = Tensor<T>::zeros({}, track(tape, logits));
  auto X = logits.data();
  std::vector<double> soft(batch * classes);
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const T* x = &X[r * classes];
    double mx = *std::max_element(x, x + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(x[c] - mx);
    const double lse = mx + std::log(z);
    total += lse - x[targets[r]];
    for (std::size_t c = 0; c < classes; ++c) soft[r * classes + c] = std::exp(x[c] - lse);
  }
  out.data()[0] = static_cast<T>(total / static_cast<double>(batch));
  if (out.requires_grad()) {
    std::vector<std::int32_t> tgt(targets.begin(), targets.end());
    tape.record([logits, out, batch, classes, soft = std::move(soft), tgt = std::move(tgt)]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto dX = logits.ensure_grad();
      const double scale = G[0] / static_cast<double>(batch);
      for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t c = 0; c < classes; ++c) {
          double onehot = static_cast<std::int32_t>(c) == tgt[r] ? 1.0 : 0.0;
          dX[r * classes + c] += static_cast<T>((soft[r * classes + c] - onehot) * scale);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> bce_with_logits(Tape<T>& tape, const Tensor<T>& logits, std::span<const std::uint8_t> targets) {
  if (logits.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "bce_with_logits expects [B, K]");
  const std::size_t n = logits.numel();
  if (targets.size() != n) {
    throw Error(ErrorCode::kInvalidTarget, std::to_string(targets.size()) + " targets for " +
                                               std::to_string(n) + " logits");
  }
  for (auto t : targets) {
    if (t > 1) throw Error(ErrorCode::kInvalidTarget, "multi-label targets must be 0 or 1");
  }
  auto out = Tensor<T>::zeros({}, track(tape, logits));
  auto X = logits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = X[i];
    total += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  out.data()[0] = static_cast<T>(total / static_cast<double>(n));
  if (out.requires_grad()) {
    std::vector<std::uint8_t> tgt(targets.begin(), targets.end());
    tape.record([logits, out, n, tgt = std::move(tgt)]() mutable {
      auto G = std::as_const(out).grad();
      if (G.empty()) return;
      auto X = std::as_const(logits).data();
      auto dX = logits.ensure_grad();
      const double scale = G[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = X[i];
        const double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        dX[i] += static_cast<T>((sig - tgt[i]) * scale);
      }
    });
  }
  return out;
}

#define PATHSAGE_INSTANTIATE_OPS(T)                                                               \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, double);                                  \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                           \
  template Tensor<T> softmax(Tape<T>&, const Tensor<T>&);                                        \
  template Tensor<T> layer_norm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                double);                                                          \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, bool, Rng&);                    \
  template Tensor<T> concat(Tape<T>&, std::span<const Tensor<T>>);                               \
  template Tensor<T> mean_groups(Tape<T>&, const Tensor<T>&, std::size_t);                       \
  template Tensor<T> add_positions(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> gather_rows(Tape<T>&, const Tensor<T>&, std::span<const std::size_t>);      \
  template Tensor<T> attention(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                               std::size_t, std::vector<T>*);                                     \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> cross_entropy(Tape<T>&, const Tensor<T>&, std::span<const std::int32_t>);   \
  template Tensor<T> bce_with_logits(Tape<T>&, const Tensor<T>&, std::span<const std::uint8_t>);

PATHSAGE_INSTANTIATE_OPS(float)
PATHSAGE_INSTANTIATE_OPS(double)

#undef PATHSAGE_INSTANTIATE_OPS

}  // namespace ops
}  // namespace pathsage
