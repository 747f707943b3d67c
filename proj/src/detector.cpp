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

#include "afran/detector.hpp"

#include <algorithm>
#include <cmath>

namespace afran {
namespace {

std::vector<Deltas> rows_to_deltas(const Tensor& reg, int batch, std::size_t rows) {
  std::vector<Deltas> d(rows);
  const double* p = reg.data().data() + static_cast<std::size_t>(batch) * rows * 4;
  for (std::size_t r = 0; r < rows; ++r) d[r] = {p[4 * r], p[4 * r + 1], p[4 * r + 2], p[4 * r + 3]};
  return d;
}

Box clip(const Box& b, double size) {
  return {std::clamp(b.x1, 0.0, size), std::clamp(b.y1, 0.0, size), std::clamp(b.x2, 0.0, size),
          std::clamp(b.y2, 0.0, size)};
}

}  // namespace

Refinement refine_image(const Model& model, const ForwardResult& fwd, int batch) {
  const auto& anchors = model.anchors();
  const std::size_t na = anchors.size();
  const std::vector<Deltas> deltas = rows_to_deltas(fwd.arm_reg, batch, na);
  std::vector<std::array<double, 2>> scores(na);
  const double* c = fwd.arm_cls.data().data() + static_cast<std::size_t>(batch) * na * 2;
  for (std::size_t r = 0; r < na; ++r) scores[r] = {c[2 * r], c[2 * r + 1]};
  Refinement out;
  out.refined = refine_anchors(anchors, deltas, scores);
  out.active = filter_negatives(out.refined.objectness, model.config().match.theta_neg);
  for (std::size_t r = 0; r < na; ++r)
    if (out.active[r]) {
      out.indices.push_back(r);
      out.active_boxes.push_back(out.refined.boxes[r]);
    }
  return out;
}

LossReport image_loss(const Model& model, const ForwardResult& fwd, int batch,
                      const std::vector<Box>& gts, const std::vector<int>& labels) {
  const NetConfig& cfg = model.config();
  const auto& anchors = model.anchors();

  Tensor arm_cls = slice(fwd.arm_cls, 0, batch, batch + 1);
  Tensor arm_reg = slice(fwd.arm_reg, 0, batch, batch + 1);
  const MatchResult arm_match = match_anchors(anchors, gts, cfg.match.pos_iou);
  PartLoss arm;
  {
    ConfLoss cl = conf_loss(arm_cls, arm_match.labels, cfg.match.ohem_ratio);
    arm.conf = cl.value;
    arm.num_pos = cl.num_pos;
    arm.num_neg = cl.num_neg;
    arm.reg = reg_loss(arm_reg, arm_match.targets, arm_match.labels);
  }

  const Refinement ref = refine_image(model, fwd, batch);
  const AdmOutput out = model.adm(fwd, batch, ref.indices, ref.active_boxes);
  const MatchResult adm_match = match_anchors(ref.active_boxes, gts, cfg.match.pos_iou);
  std::vector<int> classes(adm_match.labels.size(), 0);
  for (std::size_t r = 0; r < classes.size(); ++r)
    if (adm_match.labels[r]) {
      const int g = adm_match.gt_index[r];
      classes[r] = labels.empty() ? 1 : labels[g];
    }
  PartLoss adm;
  if (ref.indices.empty()) {
    adm.conf = Tensor::scalar(0.0);
    adm.reg = Tensor::scalar(0.0);
  } else {
    ConfLoss cl = conf_loss(out.cls, classes, cfg.match.ohem_ratio);
    adm.conf = cl.value;
    adm.num_pos = cl.num_pos;
    adm.num_neg = cl.num_neg;
    adm.reg = reg_loss(out.reg, adm_match.targets, classes);
  }
  return total_loss(arm, adm, cfg.match.alpha);
}

std::vector<Detection> detect_image(const Model& model, const ForwardResult& fwd, int batch) {
  const NetConfig& cfg = model.config();
  const Refinement ref = refine_image(model, fwd, batch);
  if (ref.indices.empty()) return {};
  const AdmOutput out = model.adm(fwd, batch, ref.indices, ref.active_boxes);
  const int k = cfg.head.num_classes;
  const double* cls = out.cls.data().data();
  const double* reg = out.reg.data().data();
  std::vector<std::vector<Detection>> per_class(k);
  for (std::size_t r = 0; r < ref.indices.size(); ++r) {
    const double* row = cls + r * k;
    const double m = *std::max_element(row, row + k);
    double z = 0;
    for (int j = 0; j < k; ++j) z += std::exp(row[j] - m);
    const Deltas d{reg[4 * r], reg[4 * r + 1], reg[4 * r + 2], reg[4 * r + 3]};
    Box box;
    bool decoded = false;
    for (int j = 1; j < k; ++j) {
      const double p = std::exp(row[j] - m) / z;
      if (p < cfg.detect_conf) continue;
      if (!decoded) box = clip(decode_deltas(ref.active_boxes[r], d).box, cfg.input_size), decoded = true;
      if (!box.valid()) break;
      per_class[j].push_back({box, p, j});
    }
  }
  std::vector<Detection> all;
  for (int j = 1; j < k; ++j) {
    auto kept = nms(std::move(per_class[j]), cfg.nms);
    all.insert(all.end(), kept.begin(), kept.end());
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (cfg.nms.keep >= 0 && all.size() > static_cast<std::size_t>(cfg.nms.keep)) all.resize(cfg.nms.keep);
  return all;
}

std::vector<std::vector<Detection>> detect_batch(const Model& model,
                                                 const std::vector<const Image*>& images) {
  NoGradGuard guard;
  const ForwardResult fwd = model.forward(image_to_tensor(images));
  std::vector<std::vector<Detection>> out;
  for (int b = 0; b < static_cast<int>(images.size()); ++b) out.push_back(detect_image(model, fwd, b));
  return out;
}

AnchorQuality anchor_quality(const Model& model, const ForwardResult& fwd, int batch,
                             const std::vector<Box>& gts) {
  AnchorQuality q;
  if (gts.empty()) return q;
  const Refinement ref = refine_image(model, fwd, batch);
  const auto& anchors = model.anchors();
  for (const Box& g : gts) {
    double bi = 0, br = 0;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      bi = std::max(bi, iou(anchors[a], g));
      br = std::max(br, iou(ref.refined.boxes[a], g));
    }
    q.initial += bi;
    q.refined += br;
  }
  q.num_gt = static_cast<int>(gts.size());
  q.initial /= q.num_gt;
  q.refined /= q.num_gt;
  return q;
}

}  // namespace afran
