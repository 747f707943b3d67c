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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "afran/anchors.hpp"
#include "afran/config.hpp"
#include "afran/layers.hpp"

namespace afran {

// ---- Detection quality -------------------------------------------------------

struct EvalOptions {
  double ap_conf = 0.05;
  double prf_conf = 0.5;
  double prf_iou = 0.5;
};

struct PrCurve {
  std::string name;
  std::vector<double> recall;
  std::vector<double> precision;
};

struct EvalReport {
  std::optional<double> ap, ap50, ap75, ap_small, ap_medium, ap_large;
  double precision = 0, recall = 0, f1 = 0;
  int num_images = 0, num_gt = 0, num_detections = 0;
  std::vector<PrCurve> curves;
  std::optional<std::int64_t> params_total, mac_total;
};

struct AreaRange {
  double lo = 0, hi = 1e10;  // inclusive on both ends
};
inline constexpr AreaRange kAreaAll{0, 1e10};
inline constexpr AreaRange kAreaSmall{0, 32.0 * 32.0};
inline constexpr AreaRange kAreaMedium{32.0 * 32.0, 96.0 * 96.0};
inline constexpr AreaRange kAreaLarge{96.0 * 96.0, 1e10};

/// Interpolated 101-point AP at one IoU threshold and area range; absent
/// when no ground truth falls in range.
std::optional<double> average_precision(const std::vector<std::vector<Detection>>& dets,
                                        const std::vector<std::vector<Box>>& gts, double iou_thresh,
                                        AreaRange area, PrCurve* curve = nullptr);

/// dets[i] and gts[i] belong to image i.
EvalReport evaluate(const std::vector<std::vector<Detection>>& dets,
                    const std::vector<std::vector<Box>>& gts, const EvalOptions& opt = {});

std::string report_to_json(const EvalReport& report);

/// Writes <stem>.csv (recall,precision) and <stem>.svg for every curve.
/// Throws std::runtime_error when the directory is not writable.
void emit_curves(const EvalReport& report, const std::filesystem::path& dir);

/// Line chart of named series against a shared x column, as SVG.
std::string line_chart_svg(const std::string& title, const std::vector<double>& x,
                           const std::vector<std::pair<std::string, std::vector<double>>>& series,
                           const std::string& x_label, const std::string& y_label);

// ---- Complexity --------------------------------------------------------------

struct LayerCost {
  std::string name;
  LayerKind kind;
  std::int64_t params = 0;
  std::int64_t macs = 0;
};

struct Complexity {
  std::vector<LayerCost> layers;
  std::int64_t params_total = 0;
  std::int64_t mac_total = 0;
};

/// C_out * (k_h * k_w * C_in + bias)
std::int64_t layer_params(const LayerDesc& layer);
/// C_out * C_in * k_h * k_w * positions
std::int64_t layer_macs(const LayerDesc& layer);

Complexity complexity_of(const std::vector<LayerDesc>& layers);
Complexity params_count(const NetConfig& cfg);
Complexity mac_count(const NetConfig& cfg, int input_size);

std::string complexity_table(const Complexity& c);
std::string complexity_to_json(const Complexity& c);

}  // namespace afran
