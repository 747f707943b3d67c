/* Copyright 2026 The AFRAN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace afran {

/// Raised when operand shapes do not satisfy an op's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Batch-channel-height-width extents of a rank-4 tensor.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  int operator[](int axis) const;
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tensor;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  // Recorded producer: parents plus a closure mapping this node's grad onto
  // the parents' grads. Leaves have neither.
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;
};

}  // namespace detail

/// Dense rank-4 tensor of 64-bit floats with optional gradient storage.
///
/// A Tensor is a shared handle; copies alias the same storage. Values are
/// treated as immutable once an op has produced them, only the gradient
/// buffer is written during backward().
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(shape, 0.0); }
  static Tensor scalar(double v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }
  bool defined() const { return impl_ != nullptr; }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double at(int n, int c, int h, int w) const {
    return impl_->data[index(n, c, h, w)];
  }
  std::size_t index(int n, int c, int h, int w) const {
    const Shape& s = impl_->shape;
    return ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w;
  }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient view; zero-filled on first access.
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  /// Copy of the values with no recorded history.
  Tensor detach() const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Disables graph recording in its scope (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Reverse-mode sweep from a scalar root. Pass `seed` to backpropagate a
/// non-scalar root with an explicit upstream gradient.
void backward(const Tensor& root);
void backward(const Tensor& root, std::span<const double> seed);

/// Wires `out` into the graph when any input requires grad and recording is
/// enabled. `fn` receives the output's impl and must accumulate into parents.
void record(Tensor& out, std::vector<Tensor> inputs,
            std::function<void(detail::TensorImpl&)> fn);

/// Accumulation helper for backward closures.
std::span<double> grad_of(detail::TensorImpl& node);

void check_finite(const Tensor& t, const char* where);

}  // namespace afran
