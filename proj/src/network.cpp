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

#include "afran/network.hpp"

#include <algorithm>
#include <stdexcept>

namespace afran {

Backbone make_backbone(ParameterStore& store, const NetConfig& cfg) {
  struct Row {
    const char* name;
    int width;
    bool pool_before;
  };
  static constexpr Row kVgg[] = {
      {"conv1_1", 64, false},  {"conv1_2", 64, false},  {"conv2_1", 128, true},
      {"conv2_2", 128, false}, {"conv3_1", 256, true},  {"conv3_2", 256, false},
      {"conv3_3", 256, false}, {"conv4_1", 512, true},  {"conv4_2", 512, false},
      {"conv4_3", 512, false}, {"conv5_1", 512, true},  {"conv5_2", 512, false},
      {"conv5_3", 512, false},
  };
  Backbone net;
  int in = 1, side = cfg.input_size;
  for (const Row& r : kVgg) {
    if (r.pool_before) side /= 2;
    const int out = cfg.width(r.width);
    net.steps.push_back({store.conv(std::string("backbone.") + r.name, {in, out, 3, 3, 1, 1, 1, true},
                                    LayerKind::Conv, side, side),
                         r.pool_before});
    in = out;
  }
  net.conv4_3 = 9;
  net.conv5_3 = 12;
  side /= 2;
  const int fc = cfg.width(1024);
  net.steps.push_back(
      {store.conv("backbone.conv6", {in, fc, 3, 3, 1, 3, 3, true}, LayerKind::Conv, side, side), true});
  net.steps.push_back(
      {store.conv("backbone.conv7", {fc, fc, 1, 1, 1, 0, 1, true}, LayerKind::Conv, side, side), false});
  net.conv7 = net.steps.size() - 1;
  return net;
}

Taps backbone_forward(const Tensor& image, const Backbone& net) {
  const Shape s = image.shape();
  if (s.c != 1 || s.h != s.w || s.h % 32 != 0 || s.h == 0)
    throw ShapeError("backbone expects (N,1,S,S) with S divisible by 32, got " + s.str());
  Taps taps;
  Tensor x = image;
  for (std::size_t i = 0; i < net.steps.size(); ++i) {
    if (net.steps[i].pool_before) x = maxpool2d(x, 2, 2);
    x = relu(net.steps[i].conv(x));
    if (i == net.conv4_3) taps.conv4_3 = x;
    if (i == net.conv5_3) taps.conv5_3 = x;
    if (i == net.conv7) taps.conv7 = x;
  }
  return taps;
}

namespace {

std::array<AffmLevelConfig, 3> level_configs(const NetConfig& cfg) {
  const int c4 = cfg.width(512), c5 = cfg.width(512), c7 = cfg.width(1024);
  const int p = cfg.dlcm.channels;
  std::array<AffmLevelConfig, 3> out;
  out[2] = {2, cfg.affm.forward_mt ? c5 : 0, c7, 0, cfg.affm.channels, cfg.affm.sa_levels[2]};
  out[1] = {1, cfg.affm.forward_bm ? c4 : 0, c5, p, cfg.affm.channels, cfg.affm.sa_levels[1]};
  out[0] = {0, 0, c4, p, cfg.affm.channels, cfg.affm.sa_levels[0]};
  return out;
}

}  // namespace

Pyramid make_pyramid(ParameterStore& store, const NetConfig& cfg) {
  Pyramid pyr;
  const auto lc = level_configs(cfg);
  static const char* kNames[] = {"p2", "p3", "p4"};
  for (int level = 2; level >= 0; --level) {
    const int side = cfg.input_size / (8 << level);
    const std::string prefix = std::string("pyramid.") + kNames[level];
    pyr.affm[level] = make_affm_level(store, prefix + ".affm", lc[level], side, side);
    pyr.dlcm[level] = make_dlcm(store, prefix + ".dlcm", affm_output_channels(lc[level]), side, side,
                                cfg.dlcm, level);
  }
  return pyr;
}

std::array<Tensor, 3> build_pyramid(const Taps& taps, const Pyramid& pyr, const NetConfig& cfg) {
  std::array<Tensor, 3> p;
  p[2] = dlcm_forward(
      affm_forward(pyr.affm[2], cfg.affm.forward_mt ? taps.conv5_3 : Tensor(), taps.conv7, Tensor()),
      pyr.dlcm[2]);
  p[1] = dlcm_forward(
      affm_forward(pyr.affm[1], cfg.affm.forward_bm ? taps.conv4_3 : Tensor(), taps.conv5_3, p[2]),
      pyr.dlcm[1]);
  p[0] = dlcm_forward(affm_forward(pyr.affm[0], Tensor(), taps.conv4_3, p[1]), pyr.dlcm[0]);
  return p;
}

Model::Model(const NetConfig& cfg, std::uint64_t seed, bool shape_only)
    : cfg_(cfg), store_(seed, shape_only) {
  cfg_.validate();
  cfg_.head.anchors_per_cell = cfg_.anchors.anchors_per_cell();
  backbone_ = make_backbone(store_, cfg_);
  pyramid_ = make_pyramid(store_, cfg_);
  const int tap_channels[3] = {cfg_.width(512), cfg_.width(512), cfg_.width(1024)};
  static const char* kNames[] = {"p2", "p3", "p4"};
  std::size_t offset = 0;
  for (int level = 0; level < 3; ++level) {
    const int stride = cfg_.anchors.strides[level];
    const int side = cfg_.input_size / stride;
    levels_[level] = {side, side, stride, offset};
    arm_[level] = make_arm_head(store_, std::string("arm.") + kNames[level], tap_channels[level], side,
                                side, cfg_.head);
    adm_[level] = make_adm_head(store_, std::string("adm.") + kNames[level], cfg_.dlcm.channels, side,
                                side, cfg_.head);
    auto a = generate_anchors(cfg_.anchors, level, side, side);
    anchors_.insert(anchors_.end(), a.begin(), a.end());
    offset = anchors_.size();
  }
}

void Model::locate(std::size_t anchor, int& level, int& cx, int& cy) const {
  const int per_cell = cfg_.head.anchors_per_cell;
  for (level = 2; level > 0 && anchor < levels_[level].anchor_offset; --level) {
  }
  const std::size_t cell = (anchor - levels_[level].anchor_offset) / per_cell;
  cx = static_cast<int>(cell % levels_[level].w);
  cy = static_cast<int>(cell / levels_[level].w);
}

ForwardResult Model::forward(const Tensor& images) const {
  if (store_.shape_only()) throw std::logic_error("forward on a shape-only model");
  if (images.shape().h != cfg_.input_size || images.shape().w != cfg_.input_size)
    throw ShapeError("model expects " + std::to_string(cfg_.input_size) + "px input, got " +
                     images.shape().str());
  Taps taps = backbone_forward(images, backbone_);
  ForwardResult out;
  const Tensor* tap[3] = {&taps.conv4_3, &taps.conv5_3, &taps.conv7};
  std::vector<Tensor> cls, reg;
  for (int level = 0; level < 3; ++level) {
    ArmOutput a = arm_forward(*tap[level], arm_[level], cfg_.head);
    cls.push_back(a.cls);
    reg.push_back(a.reg);
  }
  out.arm_cls = concat(cls, 2);
  out.arm_reg = concat(reg, 2);
  out.pyramid = build_pyramid(taps, pyramid_, cfg_);
  return out;
}

AdmOutput Model::adm(const ForwardResult& fwd, int batch, const std::vector<std::size_t>& indices,
                     const std::vector<Box>& refined) const {
  if (indices.size() != refined.size()) throw std::invalid_argument("adm: one refined box per index");
  if (!std::is_sorted(indices.begin(), indices.end()))
    throw std::invalid_argument("adm: anchor indices must be ascending");
  std::array<std::vector<AdmAnchor>, 3> per_level;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    int level, cx, cy;
    locate(indices[n], level, cx, cy);
    per_level[level].push_back({refined[n], cx, cy});
  }
  std::vector<Tensor> cls, reg;
  for (int level = 0; level < 3; ++level) {
    if (per_level[level].empty()) continue;
    AdmOutput o = adm_forward(fwd.pyramid[level], batch, per_level[level], levels_[level].stride,
                              adm_[level], cfg_.head);
    cls.push_back(o.cls);
    reg.push_back(o.reg);
  }
  if (cls.empty())
    return {Tensor(Shape{1, 1, 0, cfg_.head.num_classes}), Tensor(Shape{1, 1, 0, 4})};
  if (cls.size() == 1) return {cls[0], reg[0]};
  return {concat(cls, 2), concat(reg, 2)};
}

// dark speckled scenes sit near 40 with a spread of about a dozen grey levels
constexpr double kPixelMean = 40.0;
constexpr double kPixelScale = 24.0;

Tensor image_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw ShapeError("image_to_tensor: empty batch");
  const int w = images[0]->width, h = images[0]->height;
  Tensor t(Shape{static_cast<int>(images.size()), 1, h, w});
  auto d = t.mutable_data();
  std::size_t o = 0;
  for (const Image* img : images) {
    if (img->width != w || img->height != h) throw ShapeError("image_to_tensor: mixed sizes");
    for (std::uint8_t p : img->pixels) d[o++] = (p - kPixelMean) / kPixelScale;
  }
  return t;
}

}  // namespace afran
