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

#include "afran/adm.hpp"

#include <stdexcept>

namespace afran {

ArmHead make_arm_head(ParameterStore& store, const std::string& prefix, int in_channels, int h,
                      int w, const HeadConfig& cfg, Init init) {
  const int a = cfg.anchors_per_cell;
  ArmHead head;
  head.cls = store.conv(prefix + ".cls", ConvSpec{in_channels, 2 * a, 3, 3, 1, 1, 1, true},
                        LayerKind::Conv, h, w, init);
  head.reg = store.conv(prefix + ".reg", ConvSpec{in_channels, 4 * a, 3, 3, 1, 1, 1, true},
                        LayerKind::Conv, h, w, init);
  return head;
}

ArmOutput arm_forward(const Tensor& tap, const ArmHead& head, const HeadConfig& cfg) {
  (void)cfg;
  return {anchor_rows(head.cls(tap), 2), anchor_rows(head.reg(tap), 4)};
}

SamplingGrid base_sampling_points(int X, int Y, int k) {
  const int half = k / 2;
  SamplingGrid g;
  g.reserve(static_cast<std::size_t>(k) * k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) g.push_back({X - half + i + 0.5, Y - half + j + 0.5});
  return g;
}

SamplingGrid aligned_sampling_points(const Box& r, int k, double stride) {
  if (!(r.width() > 0) || !(r.height() > 0))
    throw std::invalid_argument("aligned_sampling_points: degenerate anchor");
  const double ks = k * stride;
  SamplingGrid g;
  g.reserve(static_cast<std::size_t>(k) * k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i)
      g.push_back({(k * r.x1 + r.width() * (i + 0.5)) / ks, (k * r.y1 + r.height() * (j + 0.5)) / ks});
  return g;
}

SamplingGrid adm_offsets(const Box& refined, int X, int Y, int k, double stride) {
  SamplingGrid s = base_sampling_points(X, Y, k);
  const SamplingGrid a = aligned_sampling_points(refined, k, stride);
  for (std::size_t n = 0; n < s.size(); ++n) s[n] = {a[n].x - s[n].x, a[n].y - s[n].y};
  return s;
}

AdmHead make_adm_head(ParameterStore& store, const std::string& prefix, int in_channels, int h,
                      int w, const HeadConfig& cfg, Init init) {
  const ConvSpec spec{in_channels, cfg.num_classes + 4, cfg.k, cfg.k, 1, cfg.k / 2, 1, true};
  // One evaluation per anchor.
  const std::int64_t positions = static_cast<std::int64_t>(h) * w * cfg.anchors_per_cell;
  return {store.conv(prefix + ".head", spec, LayerKind::AlignedHead, h, w, init, positions)};
}

AdmOutput adm_forward(const Tensor& level_map, int batch, std::span<const AdmAnchor> anchors,
                      double stride, const AdmHead& head, const HeadConfig& cfg) {
  const int k = cfg.k, half = k / 2;
  std::vector<SamplingRow> rows;
  rows.reserve(anchors.size());
  for (const AdmAnchor& a : anchors) {
    const SamplingGrid off = adm_offsets(a.refined, a.cell_x, a.cell_y, k, stride);
    SamplingRow row(off.size());
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < k; ++i) {
        const std::size_t n = static_cast<std::size_t>(j) * k + i;
        // Base tap in index space plus the geometric offset.
        row[n] = {a.cell_y - half + j + off[n].y, a.cell_x - half + i + off[n].x};
      }
    rows.push_back(std::move(row));
  }
  Tensor out = deform_gather_linear(level_map, batch, rows, head.head.weight, head.head.bias);
  if (anchors.empty())
    return {Tensor(Shape{1, 1, 0, cfg.num_classes}), Tensor(Shape{1, 1, 0, 4})};
  return {slice(out, 3, 0, cfg.num_classes), slice(out, 3, cfg.num_classes, cfg.num_classes + 4)};
}

}  // namespace afran
