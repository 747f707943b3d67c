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

#include <array>
#include <vector>

#include "afran/layers.hpp"
#include "afran/ops.hpp"

namespace afran {

struct DeformConvSpec {
  ConvSpec base;
  bool modulated = true;

  int kernel_points() const { return base.kernel_h * base.kernel_w; }
};

/// Modulated deformable convolution:
///   Y(p) = sum_k W_k * X(p + p_k + dp_k) * dm_k  (+ bias)
///
/// `offsets` is (N, 2K, H_o, W_o) with interleaved (dy, dx) per kernel point,
/// kernel points row-major. `mask` is (N, K, H_o, W_o); pass an undefined
/// Tensor for an unmodulated (mask = 1) evaluation. X is read with
/// bilinear_sample under the zero-padding convention.
Tensor modulated_deform_conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
                               const Tensor& offsets, const Tensor& mask,
                               const DeformConvSpec& spec);

/// One row of explicit sampling points: K (y, x) pairs in input index space.
using SamplingRow = std::vector<std::array<double, 2>>;

/// Bilinear gather of K points per row from input[batch], followed by a
/// linear map with `weights` (O, C, k_h, k_w) flattened to (O, C*K).
/// Returns (1, 1, rows, O). Differentiable w.r.t. input, weights and bias;
/// sampling points are treated as constants.
Tensor deform_gather_linear(const Tensor& input, int batch, const std::vector<SamplingRow>& rows,
                            const Tensor& weights, const Tensor& bias);

struct DlcmConfig {
  int stack_depth = 2;
  std::array<int, 3> dilation{1, 1, 1};  // P2, P3, P4
  int channels = 256;
};

/// One deformable unit: offset conv -> 2K map, mask conv + sigmoid -> K map,
/// modulated deformable conv, relu.
struct DlcmUnit {
  ConvLayer offset_conv;
  ConvLayer mask_conv;
  ConvLayer deform_conv;  // spec carries the level's dilation
};

struct Dlcm {
  std::vector<DlcmUnit> units;
};

/// Adds the DLCM parameters for one pyramid level (0 = P2, 1 = P3, 2 = P4).
/// Spatial size (h, w) is preserved by every unit.
Dlcm make_dlcm(ParameterStore& store, const std::string& prefix, int in_channels, int h, int w,
               const DlcmConfig& cfg, int level);

Tensor dlcm_forward(const Tensor& input, const Dlcm& dlcm);

}  // namespace afran
