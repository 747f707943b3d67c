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

#include <string>
#include <vector>

#include "afran/layers.hpp"

namespace afran {

/// Source widths for one fusion level; 0 marks an absent source.
///   lower: finer map F_{i-1}, reduced by a stride-2 conv
///   same:  F_i at the target resolution
///   upper: coarser map F_{i+1}, enlarged by a 4x4 stride-2 deconv
struct AffmLevelConfig {
  int level = 0;  // 0 = P2, 1 = P3, 2 = P4
  int lower_channels = 0;
  int same_channels = 0;
  int upper_channels = 0;
  int channels = 256;  // per-branch width c
  bool split_attention = true;

  int groups() const {
    return (lower_channels > 0) + (same_channels > 0) + (upper_channels > 0);
  }
};

struct SplitAttentionParams {
  ConvLayer pre;  // 1x1, r*c -> r*c
  ConvLayer fc;   // c -> r*c, applied to the pooled vector
};

struct AffmLevel {
  AffmLevelConfig cfg;
  std::vector<ConvLayer> lower, same, upper;  // each layer followed by relu
  SplitAttentionParams sa;                    // unused when SA is off or r == 1
};

/// Adds the parameters of one level whose output grid is h x w.
AffmLevel make_affm_level(ParameterStore& store, const std::string& prefix,
                          const AffmLevelConfig& cfg, int h, int w);

/// Runs the branches and concatenates them (lower, same, upper order) into
/// C_i with r*c channels. Absent sources are undefined Tensors.
Tensor affm_concat(const AffmLevel& level, const Tensor& lower, const Tensor& same,
                   const Tensor& upper);

/// I = sum_g a_g * K_g where K = split(relu(pre(C)), r) and a is the per-channel
/// softmax over groups of fc(avgpool(sum_g K_g)).
Tensor split_attention(const Tensor& concat, const SplitAttentionParams& params, int r);

/// affm_concat followed by split attention when enabled and r >= 2.
Tensor affm_forward(const AffmLevel& level, const Tensor& lower, const Tensor& same,
                    const Tensor& upper);

/// Channel count of affm_forward's output.
int affm_output_channels(const AffmLevelConfig& cfg);

}  // namespace afran
