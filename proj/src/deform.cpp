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

#include "afran/deform.hpp"

#include <stdexcept>

namespace afran {

namespace {

struct DeformGeometry {
  int n, c, h, w, ho, wo, kpts;
  std::size_t pix() const { return static_cast<std::size_t>(ho) * wo; }
};

// Taps for every (kernel point, output pixel) of one image.
std::vector<BilinearTap> deform_taps(const DeformGeometry& g, const ConvSpec& s,
                                     const double* offsets) {
  std::vector<BilinearTap> taps(static_cast<std::size_t>(g.kpts) * g.pix());
  const std::size_t pix = g.pix();
  for (int ky = 0; ky < s.kernel_h; ++ky)
    for (int kx = 0; kx < s.kernel_w; ++kx) {
      const int k = ky * s.kernel_w + kx;
      const double* dy = offsets + static_cast<std::size_t>(2 * k) * pix;
      const double* dx = offsets + static_cast<std::size_t>(2 * k + 1) * pix;
      for (int oy = 0; oy < g.ho; ++oy)
        for (int ox = 0; ox < g.wo; ++ox) {
          const std::size_t p = static_cast<std::size_t>(oy) * g.wo + ox;
          const double y = oy * s.stride - s.padding + ky * s.dilation + dy[p];
          const double x = ox * s.stride - s.padding + kx * s.dilation + dx[p];
          taps[k * pix + p] = bilinear_tap(y, x, g.h, g.w);
        }
    }
  return taps;
}

// Unmodulated sampled values laid out as im2col columns (C*K, pix).
void gather_values(const DeformGeometry& g, const double* image,
                   const std::vector<BilinearTap>& taps, double* values) {
  const std::size_t pix = g.pix();
  for (int c = 0; c < g.c; ++c) {
    const double* plane = image + static_cast<std::size_t>(c) * g.h * g.w;
    for (int k = 0; k < g.kpts; ++k) {
      double* row = values + (static_cast<std::size_t>(c) * g.kpts + k) * pix;
      const BilinearTap* t = taps.data() + k * pix;
      for (std::size_t p = 0; p < pix; ++p) row[p] = bilinear_value(plane, g.h, g.w, t[p]);
    }
  }
}

void apply_mask(const DeformGeometry& g, const double* mask, const double* values,
                double* columns) {
  const std::size_t pix = g.pix();
  for (int c = 0; c < g.c; ++c)
    for (int k = 0; k < g.kpts; ++k) {
      const std::size_t r = (static_cast<std::size_t>(c) * g.kpts + k) * pix;
      const double* m = mask + k * pix;
      for (std::size_t p = 0; p < pix; ++p) columns[r + p] = values[r + p] * m[p];
    }
}

}  // namespace

Tensor modulated_deform_conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
                               const Tensor& offsets, const Tensor& mask,
                               const DeformConvSpec& dspec) {
  const ConvSpec& s = dspec.base;
  const Shape xs = input.shape();
  if (xs.c != s.in_channels)
    throw ShapeError("deform conv input has " + std::to_string(xs.c) + " channels, spec expects " +
                     std::to_string(s.in_channels));
  if (!(weights.shape() == Shape{s.out_channels, s.in_channels, s.kernel_h, s.kernel_w}))
    throw ShapeError("deform conv weights shape " + weights.shape().str());
  if (s.has_bias != bias.defined() ||
      (bias.defined() && !(bias.shape() == Shape{1, s.out_channels, 1, 1})))
    throw ShapeError("deform conv bias inconsistent with spec");
  const int kpts = dspec.kernel_points();
  const DeformGeometry g{xs.n, xs.c, xs.h, xs.w, s.out_h(xs.h), s.out_w(xs.w), kpts};
  if (g.ho < 1 || g.wo < 1) throw ShapeError("deform conv output would be empty");
  if (!(offsets.shape() == Shape{xs.n, 2 * kpts, g.ho, g.wo}))
    throw ShapeError("offsets shape " + offsets.shape().str() + " inconsistent with K=" +
                     std::to_string(kpts) + " (expected " +
                     Shape{xs.n, 2 * kpts, g.ho, g.wo}.str() + ")");
  const bool modulated = mask.defined();
  if (modulated && !(mask.shape() == Shape{xs.n, kpts, g.ho, g.wo}))
    throw ShapeError("mask shape " + mask.shape().str() + " inconsistent with K=" +
                     std::to_string(kpts));

  const std::size_t pix = g.pix();
  const int kdim = g.c * kpts;
  Tensor out(Shape{xs.n, s.out_channels, g.ho, g.wo});
  std::vector<double> values(static_cast<std::size_t>(kdim) * pix);
  std::vector<double> columns(modulated ? values.size() : 0);
  for (int n = 0; n < xs.n; ++n) {
    const auto taps = deform_taps(g, s, offsets.data().data() + offsets.index(n, 0, 0, 0));
    gather_values(g, input.data().data() + input.index(n, 0, 0, 0), taps, values.data());
    const double* cols = values.data();
    if (modulated) {
      apply_mask(g, mask.data().data() + mask.index(n, 0, 0, 0), values.data(), columns.data());
      cols = columns.data();
    }
    double* dst = out.mutable_data().data() + out.index(n, 0, 0, 0);
    gemm::run(false, false, s.out_channels, static_cast<int>(pix), kdim, 1.0,
              weights.data().data(), cols, 0.0, dst);
    if (bias.defined())
      for (int o = 0; o < s.out_channels; ++o)
        for (std::size_t p = 0; p < pix; ++p) dst[o * pix + p] += bias.data()[o];
  }

  record(out, {input, weights, bias, offsets, mask}, [g, s, kdim, modulated](detail::TensorImpl& self) {
    auto* in = self.parents[0].get();
    auto* wn = self.parents[1].get();
    auto* bn = self.parents[2].get();
    auto* on = self.parents[3].get();
    auto* mn = self.parents[4].get();
    const std::size_t pix = g.pix();
    const std::size_t in_stride = static_cast<std::size_t>(g.c) * g.h * g.w;
    const std::size_t out_stride = static_cast<std::size_t>(s.out_channels) * pix;
    std::vector<double> values(static_cast<std::size_t>(kdim) * pix);
    std::vector<double> cols(values.size());
    std::vector<double> dcols(values.size());
    for (int n = 0; n < g.n; ++n) {
      const double* gy = self.grad.data() + n * out_stride;
      const double* off = on->data.data() + static_cast<std::size_t>(n) * 2 * g.kpts * pix;
      const double* msk = modulated ? mn->data.data() + static_cast<std::size_t>(n) * g.kpts * pix : nullptr;
      const double* image = in->data.data() + n * in_stride;
      const auto taps = deform_taps(g, s, off);
      gather_values(g, image, taps, values.data());
      const double* c = values.data();
      if (modulated) {
        apply_mask(g, msk, values.data(), cols.data());
        c = cols.data();
      }
      if (wn->requires_grad)
        gemm::run(false, true, s.out_channels, kdim, static_cast<int>(pix), 1.0, gy, c, 1.0,
                  grad_of(*wn).data());
      if (bn && bn->requires_grad) {
        auto gb = grad_of(*bn);
        for (int o = 0; o < s.out_channels; ++o) {
          double acc = 0.0;
          for (std::size_t p = 0; p < pix; ++p) acc += gy[o * pix + p];
          gb[o] += acc;
        }
      }
      const bool need_in = in->requires_grad;
      const bool need_off = on->requires_grad;
      const bool need_mask = modulated && mn->requires_grad;
      if (!need_in && !need_off && !need_mask) continue;
      gemm::run(true, false, kdim, static_cast<int>(pix), s.out_channels, 1.0, wn->data.data(), gy,
                0.0, dcols.data());
      double* gx = need_in ? grad_of(*in).data() + n * in_stride : nullptr;
      double* goff = need_off ? grad_of(*on).data() + static_cast<std::size_t>(n) * 2 * g.kpts * pix : nullptr;
      double* gmask = need_mask ? grad_of(*mn).data() + static_cast<std::size_t>(n) * g.kpts * pix : nullptr;
      for (int ch = 0; ch < g.c; ++ch) {
        const double* plane = image + static_cast<std::size_t>(ch) * g.h * g.w;
        double* gplane = gx ? gx + static_cast<std::size_t>(ch) * g.h * g.w : nullptr;
        for (int k = 0; k < g.kpts; ++k) {
          const std::size_t r = (static_cast<std::size_t>(ch) * g.kpts + k) * pix;
          for (std::size_t p = 0; p < pix; ++p) {
            const double dc = dcols[r + p];
            if (dc == 0.0) continue;
            const double m = modulated ? msk[k * pix + p] : 1.0;
            if (gmask) gmask[k * pix + p] += dc * values[r + p];
            if (!gplane && !goff) continue;
            auto [dy, dx] = bilinear_backward(plane, gplane, g.h, g.w, taps[k * pix + p], dc * m);
            if (goff) {
              goff[(2 * k) * pix + p] += dy;
              goff[(2 * k + 1) * pix + p] += dx;
            }
          }
        }
      }
    }
  });
  return out;
}

Tensor deform_gather_linear(const Tensor& input, int batch, const std::vector<SamplingRow>& rows,
                            const Tensor& weights, const Tensor& bias) {
  const Shape xs = input.shape();
  const Shape ws = weights.shape();
  const int kpts = ws.h * ws.w;
  if (ws.c != xs.c)
    throw ShapeError("gather weights expect " + std::to_string(ws.c) + " channels, input has " +
                     std::to_string(xs.c));
  if (bias.defined() && !(bias.shape() == Shape{1, ws.n, 1, 1}))
    throw ShapeError("gather bias shape " + bias.shape().str());
  if (batch < 0 || batch >= xs.n) throw ShapeError("gather batch index out of range");
  for (const auto& r : rows)
    if (static_cast<int>(r.size()) != kpts)
      throw ShapeError("sampling row has " + std::to_string(r.size()) + " points, kernel has " +
                       std::to_string(kpts));
  const int nrows = static_cast<int>(rows.size());
  const int kdim = xs.c * kpts;
  const int outs = ws.n;
  Tensor out(Shape{1, 1, nrows, outs});
  if (nrows == 0) return out;

  std::vector<BilinearTap> taps(static_cast<std::size_t>(nrows) * kpts);
  for (int r = 0; r < nrows; ++r)
    for (int k = 0; k < kpts; ++k)
      taps[static_cast<std::size_t>(k) * nrows + r] = bilinear_tap(rows[r][k][0], rows[r][k][1], xs.h, xs.w);

  // Columns (C*K, rows).
  auto gather = [xs, kpts, nrows](const double* image, const std::vector<BilinearTap>& taps,
                                  std::vector<double>& cols) {
    for (int c = 0; c < xs.c; ++c) {
      const double* plane = image + static_cast<std::size_t>(c) * xs.h * xs.w;
      for (int k = 0; k < kpts; ++k) {
        double* row = cols.data() + (static_cast<std::size_t>(c) * kpts + k) * nrows;
        const BilinearTap* t = taps.data() + static_cast<std::size_t>(k) * nrows;
        for (int r = 0; r < nrows; ++r) row[r] = bilinear_value(plane, xs.h, xs.w, t[r]);
      }
    }
  };
  std::vector<double> cols(static_cast<std::size_t>(kdim) * nrows);
  const double* image = input.data().data() + input.index(batch, 0, 0, 0);
  gather(image, taps, cols);
  double* dst = out.mutable_data().data();
  gemm::run(true, true, nrows, outs, kdim, 1.0, cols.data(), weights.data().data(), 0.0, dst);
  if (bias.defined())
    for (int r = 0; r < nrows; ++r)
      for (int o = 0; o < outs; ++o) dst[static_cast<std::size_t>(r) * outs + o] += bias.data()[o];

  record(out, {input, weights, bias},
         [xs, kpts, nrows, kdim, outs, batch, taps = std::move(taps), gather](detail::TensorImpl& self) {
           auto* in = self.parents[0].get();
           auto* wn = self.parents[1].get();
           auto* bn = self.parents[2].get();
           const std::size_t in_off = static_cast<std::size_t>(batch) * xs.c * xs.h * xs.w;
           const double* image = in->data.data() + in_off;
           const double* gy = self.grad.data();
           if (wn->requires_grad) {
             std::vector<double> cols(static_cast<std::size_t>(kdim) * nrows);
             gather(image, taps, cols);
             gemm::run(true, true, outs, kdim, nrows, 1.0, gy, cols.data(), 1.0, grad_of(*wn).data());
           }
           if (bn && bn->requires_grad) {
             auto gb = grad_of(*bn);
             for (int r = 0; r < nrows; ++r)
               for (int o = 0; o < outs; ++o) gb[o] += gy[static_cast<std::size_t>(r) * outs + o];
           }
           if (in->requires_grad) {
             std::vector<double> dcols(static_cast<std::size_t>(kdim) * nrows);
             gemm::run(true, true, kdim, nrows, outs, 1.0, wn->data.data(), gy, 0.0, dcols.data());
             double* gx = grad_of(*in).data() + in_off;
             for (int c = 0; c < xs.c; ++c) {
               const double* plane = image + static_cast<std::size_t>(c) * xs.h * xs.w;
               double* gplane = gx + static_cast<std::size_t>(c) * xs.h * xs.w;
               for (int k = 0; k < kpts; ++k) {
                 const double* drow = dcols.data() + (static_cast<std::size_t>(c) * kpts + k) * nrows;
                 const BilinearTap* t = taps.data() + static_cast<std::size_t>(k) * nrows;
                 for (int r = 0; r < nrows; ++r)
                   if (drow[r] != 0.0) bilinear_backward(plane, gplane, xs.h, xs.w, t[r], drow[r]);
               }
             }
           }
         });
  return out;
}

Dlcm make_dlcm(ParameterStore& store, const std::string& prefix, int in_channels, int h, int w,
               const DlcmConfig& cfg, int level) {
  if (level < 0 || level > 2)
    throw std::invalid_argument("no DLCM dilation configured for level " + std::to_string(level));
  if (cfg.stack_depth < 1) throw std::invalid_argument("DLCM stack_depth must be positive");
  const int dil = cfg.dilation[level];
  if (dil < 1) throw std::invalid_argument("DLCM dilation must be positive");
  Dlcm dlcm;
  int cin = in_channels;
  for (int u = 0; u < cfg.stack_depth; ++u) {
    const std::string name = prefix + ".unit" + std::to_string(u);
    const ConvSpec plain{cin, 18, 3, 3, 1, 1, 1, true};
    ConvSpec offset = plain;
    ConvSpec mask = plain;
    mask.out_channels = 9;
    const ConvSpec deform{cin, cfg.channels, 3, 3, 1, dil, dil, true};
    dlcm.units.push_back(DlcmUnit{
        store.conv(name + ".offset", offset, LayerKind::Conv, h, w, Init::Zero),
        store.conv(name + ".mask", mask, LayerKind::Conv, h, w, Init::Zero),
        store.conv(name + ".deform", deform, LayerKind::DeformConv, h, w)});
    cin = cfg.channels;
  }
  return dlcm;
}

Tensor dlcm_forward(const Tensor& input, const Dlcm& dlcm) {
  Tensor x = input;
  for (const auto& unit : dlcm.units) {
    Tensor offsets = unit.offset_conv(x);
    Tensor mask = sigmoid(unit.mask_conv(x));
    x = relu(modulated_deform_conv2d(x, unit.deform_conv.weight, unit.deform_conv.bias, offsets,
                                     mask, DeformConvSpec{unit.deform_conv.spec, true}));
  }
  return x;
}

}  // namespace afran
