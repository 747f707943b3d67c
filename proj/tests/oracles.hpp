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

// Test-only reference implementations. Nothing here calls into the fast
// paths (im2col, GEMM, tap caches) that the library uses.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <tuple>
#include <vector>

#include "afran/anchors.hpp"
#include "afran/metrics.hpp"
#include "afran/ops.hpp"

namespace afran::oracle {

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (double& v : t.mutable_data()) v = d(rng);
  return t;
}

/// Seven nested loops, zero padding.
inline Tensor conv2d_naive(const Tensor& x, const Tensor& w, const Tensor& b, const ConvSpec& s) {
  const Shape xs = x.shape();
  const int ho = (xs.h + 2 * s.padding - s.dilation * (s.kernel_h - 1) - 1) / s.stride + 1;
  const int wo = (xs.w + 2 * s.padding - s.dilation * (s.kernel_w - 1) - 1) / s.stride + 1;
  Tensor y(Shape{xs.n, s.out_channels, ho, wo});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < s.out_channels; ++o)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double acc = b.defined() ? b.data()[o] : 0.0;
          for (int c = 0; c < xs.c; ++c)
            for (int ky = 0; ky < s.kernel_h; ++ky)
              for (int kx = 0; kx < s.kernel_w; ++kx) {
                const int iy = oy * s.stride - s.padding + ky * s.dilation;
                const int ix = ox * s.stride - s.padding + kx * s.dilation;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                acc += w.at(o, c, ky, kx) * x.at(n, c, iy, ix);
              }
          y.mutable_data()[y.index(n, o, oy, ox)] = acc;
        }
  return y;
}

/// Scatter form of the transposed convolution: every input pixel stamps the
/// kernel onto the output.
inline Tensor deconv2d_scatter(const Tensor& x, const Tensor& w, const ConvSpec& s) {
  const Shape xs = x.shape();
  const int ho = (xs.h - 1) * s.stride - 2 * s.padding + s.dilation * (s.kernel_h - 1) + 1;
  const int wo = (xs.w - 1) * s.stride - 2 * s.padding + s.dilation * (s.kernel_w - 1) + 1;
  Tensor y(Shape{xs.n, s.out_channels, ho, wo});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c)
      for (int iy = 0; iy < xs.h; ++iy)
        for (int ix = 0; ix < xs.w; ++ix)
          for (int o = 0; o < s.out_channels; ++o)
            for (int ky = 0; ky < s.kernel_h; ++ky)
              for (int kx = 0; kx < s.kernel_w; ++kx) {
                const int oy = iy * s.stride - s.padding + ky * s.dilation;
                const int ox = ix * s.stride - s.padding + kx * s.dilation;
                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                y.mutable_data()[y.index(n, o, oy, ox)] += x.at(n, c, iy, ix) * w.at(c, o, ky, kx);
              }
  return y;
}

/// Direct bilinear interpolation, written out corner by corner.
inline double bilinear(const Tensor& x, int n, int c, double py, double px) {
  const Shape s = x.shape();
  if (py <= -1.0 || py >= s.h || px <= -1.0 || px >= s.w) return 0.0;
  const int y0 = static_cast<int>(std::floor(py));
  const int x0 = static_cast<int>(std::floor(px));
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const int yy = y0 + dy, xx = x0 + dx;
      if (yy < 0 || yy >= s.h || xx < 0 || xx >= s.w) continue;
      const double wy = dy ? py - y0 : 1.0 - (py - y0);
      const double wx = dx ? px - x0 : 1.0 - (px - x0);
      acc += wy * wx * x.at(n, c, yy, xx);
    }
  return acc;
}

/// Per-position gather-and-sum form of the modulated deformable conv.
inline Tensor deform_conv_gather(const Tensor& x, const Tensor& w, const Tensor& b,
                                 const Tensor& off, const Tensor& mask, const ConvSpec& s) {
  const Shape xs = x.shape();
  const int ho = (xs.h + 2 * s.padding - s.dilation * (s.kernel_h - 1) - 1) / s.stride + 1;
  const int wo = (xs.w + 2 * s.padding - s.dilation * (s.kernel_w - 1) - 1) / s.stride + 1;
  Tensor y(Shape{xs.n, s.out_channels, ho, wo});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < s.out_channels; ++o)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double acc = b.defined() ? b.data()[o] : 0.0;
          for (int ky = 0; ky < s.kernel_h; ++ky)
            for (int kx = 0; kx < s.kernel_w; ++kx) {
              const int k = ky * s.kernel_w + kx;
              const double py = oy * s.stride - s.padding + ky * s.dilation + off.at(n, 2 * k, oy, ox);
              const double px = ox * s.stride - s.padding + kx * s.dilation + off.at(n, 2 * k + 1, oy, ox);
              const double m = mask.defined() ? mask.at(n, k, oy, ox) : 1.0;
              for (int c = 0; c < xs.c; ++c) acc += w.at(o, c, ky, kx) * bilinear(x, n, c, py, px) * m;
            }
          y.mutable_data()[y.index(n, o, oy, ox)] = acc;
        }
  return y;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// ---- Boxes -----------------------------------------------------------------

inline Box random_box(std::mt19937_64& rng, double extent, double min_side = 2.0, double max_side = 40.0) {
  std::uniform_real_distribution<double> pos(0.0, extent), side(min_side, max_side);
  const double x = pos(rng), y = pos(rng);
  return {x, y, x + side(rng), y + side(rng)};
}

inline double reference_iou(const Box& a, const Box& b) {
  double ix = 0.0, iy = 0.0;
  if (a.x2 > b.x1 && b.x2 > a.x1) ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  if (a.y2 > b.y1 && b.y2 > a.y1) iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = ix * iy;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Threshold assignment, then forced matches taken from a fully sorted list
// of (iou desc, gt asc, anchor asc) pairs.
inline std::vector<int> brute_force_match(std::span<const Box> anchors, std::span<const Box> gts, double thresh,
                                          std::span<const char> active) {
  const auto use = [&](std::size_t i) { return active.empty() || active[i]; };
  std::vector<int> out(anchors.size(), -1);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (!use(i) || gts.empty()) continue;
    std::vector<double> v;
    for (const Box& g : gts) v.push_back(reference_iou(anchors[i], g));
    const auto it = std::max_element(v.begin(), v.end());
    if (*it >= thresh && *it > 0) out[i] = static_cast<int>(it - v.begin());
  }
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t j = 0; j < gts.size(); ++j)
    for (std::size_t i = 0; i < anchors.size(); ++i)
      if (use(i)) {
        const double o = reference_iou(anchors[i], gts[j]);
        if (o > 0) pairs.emplace_back(o, j, i);
      }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  std::vector<char> gt_used(gts.size(), 0), anchor_used(anchors.size(), 0);
  for (const auto& [o, j, i] : pairs) {
    if (gt_used[j] || anchor_used[i]) continue;
    gt_used[j] = anchor_used[i] = 1;
    out[i] = static_cast<int>(j);
  }
  return out;
}

// Suppression flags over a score-ordered index list.
inline std::vector<Detection> reference_nms(const std::vector<Detection>& dets, double thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<char> dead(dets.size(), 0);
  std::vector<Detection> kept;
  for (std::size_t p = 0; p < order.size(); ++p) {
    if (dead[p]) continue;
    kept.push_back(dets[order[p]]);
    for (std::size_t q = p + 1; q < order.size(); ++q)
      if (reference_iou(dets[order[p]].box, dets[order[q]].box) > thresh) dead[q] = 1;
  }
  return kept;
}

using Dets = std::vector<std::vector<Detection>>;
using Gts = std::vector<std::vector<Box>>;

// ---- Reference evaluator --------------------------------------------------

// Candidate gts are ranked by the key (in range, IoU, -index) and the best
// one is taken; detections are visited by descending score.
inline double reference_ap(const Dets& dets_in, const Gts& gts, double thr, AreaRange a, bool* defined) {
  auto out = [&](double area) { return area < a.lo || area > a.hi; };
  struct Row {
    double score;
    std::size_t img, idx;
    int tp;
  };
  std::vector<Row> rows;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (const Box& g : gts[i]) npos += !out(g.area());
    std::vector<std::pair<double, std::size_t>> dorder;
    for (std::size_t d = 0; d < dets_in[i].size(); ++d)
      if (dets_in[i][d].score >= 0.05) dorder.push_back({dets_in[i][d].score, d});
    std::stable_sort(dorder.begin(), dorder.end(), [](auto x, auto y) { return x.first > y.first; });
    std::vector<char> used(gts[i].size(), 0);
    for (auto [score, d] : dorder) {
      const Box& db = dets_in[i][d].box;
      std::vector<std::tuple<int, double, long>> cand;
      for (std::size_t g = 0; g < gts[i].size(); ++g) {
        const double v = reference_iou(db, gts[i][g]);
        if (!used[g] && v >= thr) cand.emplace_back(out(gts[i][g].area()) ? 0 : 1, v, -static_cast<long>(g));
      }
      if (!cand.empty()) {
        const auto [in_range, v, neg_g] = *std::max_element(cand.begin(), cand.end());
        used[-neg_g] = 1;
        if (in_range) rows.push_back({score, i, d, 1});
      } else if (!out(db.area())) {
        rows.push_back({score, i, d, 0});
      }
    }
  }
  *defined = npos > 0;
  if (!npos) return 0;
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    return std::tie(y.score, x.img, x.idx) < std::tie(x.score, y.img, y.idx);
  });
  std::vector<double> rc, pr;
  double tp = 0, fp = 0;
  for (const Row& r : rows) {
    r.tp ? ++tp : ++fp;
    rc.push_back(tp / npos);
    pr.push_back(tp / (tp + fp));
  }
  for (long k = static_cast<long>(pr.size()) - 2; k >= 0; --k) pr[k] = std::max(pr[k], pr[k + 1]);
  double s = 0;
  for (int t = 0; t <= 100; ++t) {
    const double r = t / 100.0;
    std::size_t k = 0;
    while (k < rc.size() && rc[k] < r) ++k;
    s += k < rc.size() ? pr[k] : 0.0;
  }
  return s / 101.0;
}

inline std::pair<Dets, Gts> random_fixture(std::mt19937_64& rng, int images) {
  Dets dets(images);
  Gts gts(images);
  std::uniform_real_distribution<double> u(0, 1), jit(-8, 8);
  std::uniform_int_distribution<int> ng(0, 5), nfp(0, 4);
  for (int i = 0; i < images; ++i) {
    for (int g = ng(rng); g > 0; --g) gts[i].push_back(random_box(rng, 300, 12, 140));
    for (const Box& g : gts[i])
      for (int k = static_cast<int>(rng() % 3); k > 0; --k) {
        const double dx = jit(rng), dy = jit(rng);
        // coarse scores so that ties across images occur
        dets[i].push_back({{g.x1 + dx, g.y1 + dy, g.x2 + dx, g.y2 - dy}, std::round(u(rng) * 20) / 20});
      }
    for (int k = nfp(rng); k > 0; --k) dets[i].push_back({random_box(rng, 300, 8, 100), std::round(u(rng) * 20) / 20});
  }
  return {dets, gts};
}

}  // namespace afran::oracle
