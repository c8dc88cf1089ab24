// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pathsage/error.hpp"

namespace pathsage {

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

// Dense row-major tensor with shared ownership of its storage. Copies alias
// the same buffer; use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto s = std::make_shared<Storage>();
    s->data.assign(numel_of(shape), T(0));
    s->shape = std::move(shape);
    s->requires_grad = requires_grad;
    return Tensor(std::move(s));
  }

  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (data.size() != numel_of(shape)) {
      throw Error(ErrorCode::kShapeMismatch, "data length " + std::to_string(data.size()) +
                                                 " does not match shape " + shape_string(shape));
    }
    auto s = std::make_shared<Storage>();
    s->shape = std::move(shape);
    s->data = std::move(data);
    s->requires_grad = requires_grad;
    return Tensor(std::move(s));
  }

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return s_->shape.at(axis); }
  std::size_t numel() const { return s_->data.size(); }
  // Size of the last axis (1 for scalars).
  std::size_t last_dim() const { return rank() == 0 ? 1 : s_->shape.back(); }

  std::span<T> data() { return s_->data; }
  std::span<const T> data() const { return s_->data; }
  T item() const {
    if (numel() != 1) throw Error(ErrorCode::kNonScalarLoss, "item() on " + shape_string(shape()));
    return s_->data[0];
  }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool flag) { s_->requires_grad = flag; }

  bool has_grad() const { return !s_->grad.empty(); }
  std::span<T> grad() { return s_->grad; }
  std::span<const T> grad() const { return s_->grad; }
  // Allocates a zero gradient buffer on first use. Const like the other
  // handle operations: the buffer lives in the shared storage.
  std::span<T> ensure_grad() const {
    if (s_->grad.empty()) s_->grad.assign(numel(), T(0));
    return s_->grad;
  }
  void zero_grad() {
    if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), T(0));
  }

  Tensor clone() const {
    auto s = std::make_shared<Storage>(*s_);
    return Tensor(std::move(s));
  }

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Storage> s) : s_(std::move(s)) {}

  std::shared_ptr<Storage> s_;
};

// Records vector-Jacobian products in creation order (which is a
// topological order) and replays them in reverse on backward().
template <typename T>
class Tape {
 public:
  explicit Tape(bool enabled = true) : enabled_(enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return enabled_; }
  std::size_t size() const { return entries_.size(); }

  void record(std::function<void()> vjp) { entries_.push_back(std::move(vjp)); }

  // Seeds d(loss)/d(loss) = 1, runs every recorded vjp once in reverse and
  // clears the tape. Leaf gradients accumulate across calls.
  void backward(Tensor<T>& loss) {
    if (loss.numel() != 1) {
      throw Error(ErrorCode::kNonScalarLoss, "backward() needs a scalar, got " +
                                                 shape_string(loss.shape()));
    }
    if (loss.requires_grad()) loss.ensure_grad()[0] += T(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    entries_.clear();
  }

  void clear() { entries_.clear(); }

 private:
  std::vector<std::function<void()>> entries_;
  bool enabled_ = true;
};

}  // namespace pathsage
