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
#include <memory>
#include <vector>

#include "afran/adm.hpp"
#include "afran/affm.hpp"
#include "afran/config.hpp"
#include "afran/deform.hpp"

namespace afran {

// ---- Backbone ---------------------------------------------------------------

struct Taps {
  Tensor conv4_3;  // stride 8
  Tensor conv5_3;  // stride 16
  Tensor conv7;    // stride 32
};

/// VGG-16 conv stages on a 1-channel input, then pool5 + conv6 (3x3,
/// dilation 3) + conv7 (1x1). Every conv is followed by relu.
struct Backbone {
  struct Step {
    ConvLayer conv;
    bool pool_before = false;  // 2x2 stride-2 max pool
  };
  std::vector<Step> steps;
  std::size_t conv4_3 = 0, conv5_3 = 0, conv7 = 0;  // tap step indices
};

Backbone make_backbone(ParameterStore& store, const NetConfig& cfg);
/// Throws ShapeError unless the image is (N,1,S,S) with S divisible by 32.
Taps backbone_forward(const Tensor& image, const Backbone& net);

// ---- Pyramid ----------------------------------------------------------------

struct Pyramid {
  std::array<AffmLevel, 3> affm;  // P2, P3, P4
  std::array<Dlcm, 3> dlcm;
};

Pyramid make_pyramid(ParameterStore& store, const NetConfig& cfg);
/// Built top-down P4 -> P3 -> P2; returned as {P2, P3, P4}.
std::array<Tensor, 3> build_pyramid(const Taps& taps, const Pyramid& pyr, const NetConfig& cfg);

// ---- Full detector ----------------------------------------------------------

struct LevelGeometry {
  int h = 0, w = 0, stride = 0;
  std::size_t anchor_offset = 0;  // first anchor of the level in the flat list
};

struct ForwardResult {
  Tensor arm_cls;  // (N, 1, A_total, 2)
  Tensor arm_reg;  // (N, 1, A_total, 4)
  std::array<Tensor, 3> pyramid;
};

class Model {
 public:
  /// `shape_only` builds the layer table without weights (complexity only).
  explicit Model(const NetConfig& cfg, std::uint64_t seed = 0, bool shape_only = false);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const NetConfig& config() const { return cfg_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }

  const std::vector<Box>& anchors() const { return anchors_; }
  const std::array<LevelGeometry, 3>& levels() const { return levels_; }
  /// Level, cell x, cell y of a flat anchor index.
  void locate(std::size_t anchor, int& level, int& cx, int& cy) const;

  ForwardResult forward(const Tensor& images) const;

  /// ADM outputs for one image over the given flat anchor indices with their
  /// refined boxes. Rows follow the order of `indices`.
  AdmOutput adm(const ForwardResult& fwd, int batch, const std::vector<std::size_t>& indices,
                const std::vector<Box>& refined) const;

  const Backbone& backbone() const { return backbone_; }
  const Pyramid& pyramid() const { return pyramid_; }
  const std::array<ArmHead, 3>& arm_heads() const { return arm_; }
  const std::array<AdmHead, 3>& adm_heads() const { return adm_; }

 private:
  NetConfig cfg_;
  ParameterStore store_;
  Backbone backbone_;
  Pyramid pyramid_;
  std::array<ArmHead, 3> arm_;
  std::array<AdmHead, 3> adm_;
  std::array<LevelGeometry, 3> levels_;
  std::vector<Box> anchors_;
};

/// Converts 8-bit pixels to the network input scale.
Tensor image_to_tensor(const std::vector<const Image*>& images);

}  // namespace afran
