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
#include <span>
#include <vector>

namespace afran {

/// Axis-aligned box in image pixels.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool valid() const { return x2 > x1 && y2 > y1; }
  bool operator==(const Box&) const = default;
};

struct AnchorConfig {
  std::array<double, 3> scales{32, 64, 128};  // P2, P3, P4
  std::vector<double> ratios{0.5, 1.0, 2.0};  // h / w
  std::array<int, 3> strides{8, 16, 32};

  int anchors_per_cell() const { return static_cast<int>(ratios.size()); }
};

/// Cell-major anchors: index (y*feature_w + x)*|ratios| + r. Ratio rho = h/w
/// at constant area: w = scale/sqrt(rho), h = scale*sqrt(rho).
std::vector<Box> generate_anchors(const AnchorConfig& cfg, int level, int feature_h, int feature_w);

double iou(const Box& a, const Box& b);

struct Deltas {
  double dx = 0, dy = 0, dw = 0, dh = 0;
};

inline constexpr double kCenterVariance = 0.1;
inline constexpr double kSizeVariance = 0.2;

Deltas encode_deltas(const Box& anchor, const Box& gt);

struct DecodedBox {
  Box box;
  bool clamped = false;  // a non-positive size was clamped to one pixel
};
DecodedBox decode_deltas(const Box& anchor, const Deltas& d);

inline constexpr int kNoMatch = -1;

struct MatchResult {
  std::vector<int> gt_index;  // per anchor, kNoMatch for negatives
  std::vector<int> labels;    // 1 positive, 0 negative
  std::vector<Deltas> targets;
  int num_positive = 0;
};

/// Every gt claims its max-IoU anchor; additionally any anchor whose best IoU
/// is >= pos_thresh is positive for that gt. Ties go to the lower index.
/// `active`, when non-empty, restricts matching to anchors flagged true.
MatchResult match_anchors(std::span<const Box> anchors, std::span<const Box> gts,
                          double pos_thresh = 0.5, std::span<const char> active = {});

struct RefinedAnchors {
  std::vector<Box> boxes;
  std::vector<double> objectness;  // foreground probability
  std::vector<char> clamped;
};

/// `scores` are (background, object) logit pairs per anchor.
RefinedAnchors refine_anchors(std::span<const Box> anchors, std::span<const Deltas> deltas,
                              std::span<const std::array<double, 2>> scores);

/// True for anchors kept for the detection stage: background probability
/// (1 - objectness) must not exceed theta_neg.
std::vector<char> filter_negatives(std::span<const double> objectness, double theta_neg = 0.99);

struct Detection {
  Box box;
  double score = 0;
  int label = 1;
};

struct NmsConfig {
  double iou_thresh = 0.45;
  int pre_top_k = 1000;
  int keep = 200;
};

/// Greedy suppression in descending score order (stable on ties).
std::vector<Detection> nms(std::vector<Detection> dets, const NmsConfig& cfg = {});

}  // namespace afran
