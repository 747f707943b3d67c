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

#include <span>
#include <vector>

#include "afran/anchors.hpp"
#include "afran/deform.hpp"

namespace afran {

struct HeadConfig {
  int k = 3;
  int num_classes = 2;  // background + aircraft
  int anchors_per_cell = 3;
};

// ---- ARM ------------------------------------------------------------------

struct ArmHead {
  ConvLayer cls;  // 2A channels
  ConvLayer reg;  // 4A channels
};

/// Anchor-major predictions: cls (N,1,H*W*A,2), reg (N,1,H*W*A,4).
struct ArmOutput {
  Tensor cls;
  Tensor reg;
};

ArmHead make_arm_head(ParameterStore& store, const std::string& prefix, int in_channels, int h,
                      int w, const HeadConfig& cfg, Init init = Init::SmallNormal);
ArmOutput arm_forward(const Tensor& tap, const ArmHead& head, const HeadConfig& cfg);

// ---- Sampling geometry ----------------------------------------------------

/// Feature-plane point; continuous coordinate u sits at index u - 0.5.
struct PlanePoint {
  double x = 0, y = 0;
};

/// k*k points, j (vertical) major then i (horizontal), matching the kernel
/// point order of the deformable ops.
using SamplingGrid = std::vector<PlanePoint>;

SamplingGrid base_sampling_points(int X, int Y, int k);
/// Throws std::invalid_argument for a zero-area anchor.
SamplingGrid aligned_sampling_points(const Box& refined, int k, double stride);
/// aligned - base
SamplingGrid adm_offsets(const Box& refined, int X, int Y, int k, double stride);

// ---- ADM ------------------------------------------------------------------

/// Deformable k x k kernel read at the aligned points and mapped straight to
/// num_classes logits and 4 deltas. Weights (num_classes + 4, C, k, k).
struct AdmHead {
  ConvLayer head;
};

struct AdmAnchor {
  Box refined;
  int cell_x = 0, cell_y = 0;
};

/// cls (1,1,A,num_classes), reg (1,1,A,4).
struct AdmOutput {
  Tensor cls;
  Tensor reg;
};

AdmHead make_adm_head(ParameterStore& store, const std::string& prefix, int in_channels, int h,
                      int w, const HeadConfig& cfg, Init init = Init::SmallNormal);

/// Offsets are geometry only: no gradient flows into the refined anchors.
/// Mask is fixed to 1.
AdmOutput adm_forward(const Tensor& level_map, int batch, std::span<const AdmAnchor> anchors,
                      double stride, const AdmHead& head, const HeadConfig& cfg);

}  // namespace afran
