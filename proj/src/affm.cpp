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

#include "afran/affm.hpp"

#include <stdexcept>

namespace afran {
namespace {

Tensor run_branch(const std::vector<ConvLayer>& layers, Tensor x) {
  for (const ConvLayer& l : layers) x = relu(l(x));
  return x;
}

}  // namespace

AffmLevel make_affm_level(ParameterStore& store, const std::string& prefix,
                          const AffmLevelConfig& cfg, int h, int w) {
  if (cfg.groups() == 0) throw std::invalid_argument(prefix + ": fusion level has no sources");
  const int c = cfg.channels;
  AffmLevel out;
  out.cfg = cfg;
  if (cfg.lower_channels > 0) {
    out.lower.push_back(store.conv(prefix + ".lower.0", {cfg.lower_channels, c, 3, 3, 2, 1, 1, true},
                                   LayerKind::Conv, h, w));
    out.lower.push_back(
        store.conv(prefix + ".lower.1", {c, c, 3, 3, 1, 1, 1, true}, LayerKind::Conv, h, w));
  }
  if (cfg.same_channels > 0) {
    out.same.push_back(store.conv(prefix + ".same.0", {cfg.same_channels, c, 3, 3, 1, 1, 1, true},
                                  LayerKind::Conv, h, w));
    out.same.push_back(
        store.conv(prefix + ".same.1", {c, c, 3, 3, 1, 1, 1, true}, LayerKind::Conv, h, w));
  }
  if (cfg.upper_channels > 0) {
    // Deconv MAC is counted over its input grid.
    out.upper.push_back(store.conv(prefix + ".upper.0", {cfg.upper_channels, c, 4, 4, 2, 1, 1, true},
                                   LayerKind::Deconv, h / 2, w / 2));
  }
  const int r = cfg.groups();
  if (cfg.split_attention && r >= 2) {
    out.sa.pre = store.conv(prefix + ".sa.pre", {r * c, r * c, 1, 1, 1, 0, 1, true}, LayerKind::Conv,
                            h, w);
    out.sa.fc = store.conv(prefix + ".sa.fc", {c, r * c, 1, 1, 1, 0, 1, true}, LayerKind::Linear, 1, 1);
  }
  return out;
}

Tensor affm_concat(const AffmLevel& level, const Tensor& lower, const Tensor& same,
                   const Tensor& upper) {
  const AffmLevelConfig& cfg = level.cfg;
  auto check = [](bool want, const Tensor& t, const char* which) {
    if (want != t.defined())
      throw std::invalid_argument(std::string("affm_concat: source '") + which +
                                  (want ? "' missing" : "' not configured"));
  };
  check(cfg.lower_channels > 0, lower, "lower");
  check(cfg.same_channels > 0, same, "same");
  check(cfg.upper_channels > 0, upper, "upper");
  std::vector<Tensor> parts;
  if (lower.defined()) parts.push_back(run_branch(level.lower, lower));
  if (same.defined()) parts.push_back(run_branch(level.same, same));
  if (upper.defined()) parts.push_back(run_branch(level.upper, upper));
  for (const Tensor& p : parts)
    if (p.shape().h != parts[0].shape().h || p.shape().w != parts[0].shape().w)
      throw ShapeError("affm_concat: branch grids disagree (" + parts[0].shape().str() + " vs " +
                       p.shape().str() + ")");
  return parts.size() == 1 ? parts[0] : concat_channels(parts);
}

Tensor split_attention(const Tensor& concat, const SplitAttentionParams& params, int r) {
  if (r < 2) throw std::invalid_argument("split_attention needs at least two groups");
  if (concat.shape().c % r != 0)
    throw ShapeError("split_attention: " + std::to_string(concat.shape().c) +
                     " channels not divisible by " + std::to_string(r));
  std::vector<Tensor> k = split_channels(relu(params.pre(concat)), r);
  Tensor u = k[0];
  for (int g = 1; g < r; ++g) u = add(u, k[g]);
  Tensor a = group_softmax(params.fc(global_avg_pool(u)), r);
  const int c = k[0].shape().c;
  Tensor out;
  for (int g = 0; g < r; ++g) {
    Tensor term = channel_scale(k[g], slice(a, 1, g * c, (g + 1) * c));
    out = g == 0 ? term : add(out, term);
  }
  return out;
}

Tensor affm_forward(const AffmLevel& level, const Tensor& lower, const Tensor& same,
                    const Tensor& upper) {
  Tensor c = affm_concat(level, lower, same, upper);
  const int r = level.cfg.groups();
  if (!level.cfg.split_attention || r < 2) return c;
  return split_attention(c, level.sa, r);
}

int affm_output_channels(const AffmLevelConfig& cfg) {
  const int r = cfg.groups();
  return (cfg.split_attention && r >= 2) ? cfg.channels : r * cfg.channels;
}

}  // namespace afran
