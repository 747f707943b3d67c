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

#include "afran/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace afran {
namespace {

// Caps exp() in decode so a wild prediction cannot overflow.
constexpr double kMaxLogScale = 4.135166556742356;  // log(1000/16)

}  // namespace

std::vector<Box> generate_anchors(const AnchorConfig& cfg, int level, int feature_h,
                                  int feature_w) {
  if (level < 0 || level > 2) throw std::invalid_argument("generate_anchors: level must be 0..2");
  const double scale = cfg.scales[level];
  const double stride = cfg.strides[level];
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(feature_h) * feature_w * cfg.ratios.size());
  for (int y = 0; y < feature_h; ++y)
    for (int x = 0; x < feature_w; ++x) {
      const double cx = (x + 0.5) * stride, cy = (y + 0.5) * stride;
      for (double rho : cfg.ratios) {
        const double w = scale / std::sqrt(rho), h = scale * std::sqrt(rho);
        out.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
      }
    }
  return out;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Deltas encode_deltas(const Box& a, const Box& g) {
  return {(g.cx() - a.cx()) / (a.width() * kCenterVariance),
          (g.cy() - a.cy()) / (a.height() * kCenterVariance),
          std::log(g.width() / a.width()) / kSizeVariance,
          std::log(g.height() / a.height()) / kSizeVariance};
}

DecodedBox decode_deltas(const Box& a, const Deltas& d) {
  const double cx = a.cx() + d.dx * kCenterVariance * a.width();
  const double cy = a.cy() + d.dy * kCenterVariance * a.height();
  double w = a.width() * std::exp(std::min(d.dw * kSizeVariance, kMaxLogScale));
  double h = a.height() * std::exp(std::min(d.dh * kSizeVariance, kMaxLogScale));
  DecodedBox out;
  if (!(w > 0)) w = 1.0, out.clamped = true;
  if (!(h > 0)) h = 1.0, out.clamped = true;
  out.box = {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  return out;
}

MatchResult match_anchors(std::span<const Box> anchors, std::span<const Box> gts,
                          double pos_thresh, std::span<const char> active) {
  const std::size_t na = anchors.size(), ng = gts.size();
  if (!active.empty() && active.size() != na)
    throw std::invalid_argument("match_anchors: active mask size mismatch");
  auto usable = [&](std::size_t i) { return active.empty() || active[i]; };

  MatchResult m;
  m.gt_index.assign(na, kNoMatch);
  m.labels.assign(na, 0);
  m.targets.assign(na, Deltas{});
  if (ng == 0) return m;

  std::vector<double> overlaps(na * ng, 0.0);
  for (std::size_t i = 0; i < na; ++i) {
    if (!usable(i)) continue;
    for (std::size_t j = 0; j < ng; ++j) overlaps[i * ng + j] = iou(anchors[i], gts[j]);
  }

  // Threshold rule: best gt per anchor, lower gt index on ties.
  for (std::size_t i = 0; i < na; ++i) {
    if (!usable(i)) continue;
    int best = kNoMatch;
    double best_iou = 0.0;
    for (std::size_t j = 0; j < ng; ++j)
      if (overlaps[i * ng + j] > best_iou) best_iou = overlaps[i * ng + j], best = static_cast<int>(j);
    if (best != kNoMatch && best_iou >= pos_thresh) m.gt_index[i] = best;
  }

  // Forced best match, greedy bipartite: repeatedly take the globally largest
  // remaining (anchor, gt) pair so two gts never fight over one anchor.
  std::vector<char> gt_done(ng, 0), anchor_taken(na, 0);
  for (std::size_t round = 0; round < ng; ++round) {
    double best_iou = 0.0;
    std::size_t bi = na, bj = ng;
    for (std::size_t j = 0; j < ng; ++j) {
      if (gt_done[j]) continue;
      for (std::size_t i = 0; i < na; ++i) {
        if (anchor_taken[i] || !usable(i)) continue;
        if (overlaps[i * ng + j] > best_iou) best_iou = overlaps[i * ng + j], bi = i, bj = j;
      }
    }
    if (bj == ng) break;  // remaining gts overlap no usable anchor
    gt_done[bj] = 1;
    anchor_taken[bi] = 1;
    m.gt_index[bi] = static_cast<int>(bj);
  }

  for (std::size_t i = 0; i < na; ++i) {
    if (m.gt_index[i] == kNoMatch) continue;
    m.labels[i] = 1;
    m.targets[i] = encode_deltas(anchors[i], gts[m.gt_index[i]]);
    ++m.num_positive;
  }
  return m;
}

RefinedAnchors refine_anchors(std::span<const Box> anchors, std::span<const Deltas> deltas,
                              std::span<const std::array<double, 2>> scores) {
  if (deltas.size() != anchors.size() || scores.size() != anchors.size())
    throw std::invalid_argument("refine_anchors: one delta and one score pair per anchor");
  RefinedAnchors out;
  out.boxes.reserve(anchors.size());
  out.objectness.reserve(anchors.size());
  out.clamped.reserve(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    DecodedBox d = decode_deltas(anchors[i], deltas[i]);
    out.boxes.push_back(d.box);
    out.clamped.push_back(d.clamped);
    out.objectness.push_back(1.0 / (1.0 + std::exp(scores[i][0] - scores[i][1])));
  }
  return out;
}

std::vector<char> filter_negatives(std::span<const double> objectness, double theta_neg) {
  std::vector<char> keep(objectness.size());
  for (std::size_t i = 0; i < objectness.size(); ++i) keep[i] = (1.0 - objectness[i]) <= theta_neg;
  return keep;
}

std::vector<Detection> nms(std::vector<Detection> dets, const NmsConfig& cfg) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (cfg.pre_top_k >= 0 && dets.size() > static_cast<std::size_t>(cfg.pre_top_k))
    dets.resize(cfg.pre_top_k);
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    if (cfg.keep >= 0 && kept.size() >= static_cast<std::size_t>(cfg.keep)) break;
    bool suppressed = false;
    for (const Detection& k : kept)
      if (iou(d.box, k.box) > cfg.iou_thresh) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace afran
