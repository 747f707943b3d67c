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

#include "afran/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace afran {

namespace {
thread_local bool g_grad_enabled = true;
}

int Shape::operator[](int axis) const {
  switch (axis) {
    case 0: return n;
    case 1: return c;
    case 2: return h;
    case 3: return w;
    default: throw ShapeError("axis out of range: " + std::to_string(axis));
  }
}

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, double fill)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
    throw ShapeError("negative extent in shape " + shape.str());
  impl_->shape = shape;
  impl_->data.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (data.size() != shape.numel())
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape.str());
  impl_->shape = shape;
  impl_->data = std::move(data);
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item() on tensor of shape " + shape().str());
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

std::span<double> Tensor::grad() { return grad_of(*impl_); }

std::span<const double> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

std::span<double> grad_of(detail::TensorImpl& node) {
  if (node.grad.empty()) node.grad.assign(node.data.size(), 0.0);
  return node.grad;
}

void record(Tensor& out, std::vector<Tensor> inputs,
            std::function<void(detail::TensorImpl&)> fn) {
  if (!g_grad_enabled) return;
  bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
    return t.defined() && t.requires_grad();
  });
  if (!any) return;
  auto* impl = out.impl();
  impl->requires_grad = true;
  impl->parents.clear();
  for (auto& t : inputs) impl->parents.push_back(t.defined() ? t.impl_ptr() : nullptr);
  impl->backward_fn = std::move(fn);
}

namespace {

// Post-order over the recorded graph; reversed it is a valid sweep order.
std::vector<detail::TensorImpl*> topo_order(detail::TensorImpl* root) {
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> seen;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::TensorImpl* p = node->parents[next++].get();
      if (p && p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace

void backward(const Tensor& root, std::span<const double> seed) {
  if (!root.requires_grad())
    throw std::logic_error("backward() on a tensor that does not require grad");
  if (seed.size() != root.numel())
    throw ShapeError("backward seed length does not match root");
  auto* r = root.impl();
  auto g = grad_of(*r);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  for (detail::TensorImpl* node : topo_order(r)) {
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

void backward(const Tensor& root) {
  if (root.numel() != 1)
    throw ShapeError("backward() without seed needs a scalar root, got " +
                     root.shape().str());
  const double one = 1.0;
  backward(root, std::span<const double>(&one, 1));
}

void check_finite(const Tensor& t, const char* where) {
  for (double v : t.data())
    if (!std::isfinite(v))
      throw std::runtime_error(std::string("non-finite value in ") + where);
}

}  // namespace afran
