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

#include "afran/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace afran {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Deconv: return "deconv";
    case LayerKind::DeformConv: return "deform";
    case LayerKind::Linear: return "fc";
    case LayerKind::AlignedHead: return "aligned";
  }
  return "?";
}

Tensor ConvLayer::operator()(const Tensor& x) const {
  return transposed ? deconv2d(x, weight, bias, spec) : conv2d(x, weight, bias, spec);
}

ParameterStore::ParameterStore(std::uint64_t seed, bool shape_only)
    : rng_(seed), shape_only_(shape_only) {}

Tensor ParameterStore::make(const std::string& name, Shape shape, Init init, int fan_in) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter name " + name);
  Tensor t(shape);
  if (init != Init::Zero) {
    const double std_dev =
        init == Init::Kaiming ? std::sqrt(2.0 / static_cast<double>(fan_in)) : 0.01;
    std::normal_distribution<double> dist(0.0, std_dev);
    for (double& v : t.mutable_data()) v = dist(rng_);
  }
  t.set_requires_grad(true);
  index_[name] = params_.size();
  params_.emplace_back(name, t);
  return t;
}

ConvLayer ParameterStore::conv(const std::string& name, const ConvSpec& spec, LayerKind kind,
                               int out_h, int out_w, Init init, std::int64_t positions) {
  LayerDesc desc{name, kind, spec, out_h, out_w,
                 positions >= 0 ? positions : static_cast<std::int64_t>(out_h) * out_w};
  layers_.push_back(desc);
  ConvLayer layer{name, spec, kind == LayerKind::Deconv, {}, {}};
  if (shape_only_) return layer;
  const Shape wshape =
      kind == LayerKind::Deconv
          ? Shape{spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w}
          : Shape{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w};
  const int fan_in = kind == LayerKind::Deconv
                         ? spec.in_channels * spec.kernel_h * spec.kernel_w /
                               (spec.stride * spec.stride)
                         : spec.in_channels * spec.kernel_h * spec.kernel_w;
  layer.weight = make(name + ".weight", wshape, init, std::max(fan_in, 1));
  if (spec.has_bias) layer.bias = make(name + ".bias", Shape{1, spec.out_channels, 1, 1}, Init::Zero, 1);
  return layer;
}

Tensor ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return params_[it->second].second;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

}  // namespace afran
