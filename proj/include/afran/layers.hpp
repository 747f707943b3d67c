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

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "afran/ops.hpp"

namespace afran {

enum class LayerKind { Conv, Deconv, DeformConv, Linear, AlignedHead };

const char* to_string(LayerKind kind);

/// Static description of one weighted layer, enough for Params/MAC counting.
struct LayerDesc {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  ConvSpec spec;
  int out_h = 1;  // output feature extent (input extent for Deconv MAC, see complexity)
  int out_w = 1;
  std::int64_t positions = 0;  // evaluation sites used for MAC
};

enum class Init { Kaiming, Zero, SmallNormal };

struct ConvLayer {
  std::string name;
  ConvSpec spec;
  bool transposed = false;
  Tensor weight;
  Tensor bias;

  Tensor operator()(const Tensor& x) const;
};

/// Ordered registry of trainable tensors plus the layer table they came from.
///
/// With `shape_only` set, layers are described but no storage is allocated;
/// the complexity report uses this to account full-width configs cheaply.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0, bool shape_only = false);

  /// Registers a layer evaluated at `positions` sites whose output grid is
  /// out_h x out_w.
  ConvLayer conv(const std::string& name, const ConvSpec& spec, LayerKind kind, int out_h,
                 int out_w, Init init = Init::Kaiming, std::int64_t positions = -1);

  const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }
  const std::vector<LayerDesc>& layers() const { return layers_; }
  Tensor find(const std::string& name) const;
  bool shape_only() const { return shape_only_; }

  std::size_t parameter_count() const;
  void zero_grad();

 private:
  Tensor make(const std::string& name, Shape shape, Init init, int fan_in);

  std::mt19937_64 rng_;
  bool shape_only_;
  std::vector<std::pair<std::string, Tensor>> params_;
  std::map<std::string, std::size_t> index_;
  std::vector<LayerDesc> layers_;
};

}  // namespace afran
