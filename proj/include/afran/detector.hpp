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

#include <vector>

#include "afran/loss.hpp"
#include "afran/network.hpp"

namespace afran {

/// ARM decoding for one image of a forward pass.
struct Refinement {
  RefinedAnchors refined;
  std::vector<char> active;          // survives filter_negatives
  std::vector<std::size_t> indices;  // active anchor indices, ascending
  std::vector<Box> active_boxes;
};

Refinement refine_image(const Model& model, const ForwardResult& fwd, int batch);

/// Per-image training loss: ARM against initial anchors, ADM against active
/// refined anchors rematched to the gts.
LossReport image_loss(const Model& model, const ForwardResult& fwd, int batch,
                      const std::vector<Box>& gts, const std::vector<int>& labels);

/// Inference for one image: ARM -> filter -> ADM -> decode against refined
/// anchors -> per-class NMS. Boxes are clipped to the input canvas.
std::vector<Detection> detect_image(const Model& model, const ForwardResult& fwd, int batch);

/// Runs forward + detect_image over a batch without recording gradients.
std::vector<std::vector<Detection>> detect_batch(const Model& model, const std::vector<const Image*>& images);

/// Mean over gts of the best IoU reached by any initial anchor and by any
/// refined anchor (ARM output).
struct AnchorQuality {
  double initial = 0;
  double refined = 0;
  int num_gt = 0;
};
AnchorQuality anchor_quality(const Model& model, const ForwardResult& fwd, int batch,
                             const std::vector<Box>& gts);

}  // namespace afran
