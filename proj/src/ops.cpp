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

#include "afran/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace afran {

namespace gemm {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

void run(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
         const double* a, const double* b, double beta, double* c) {
  Map C(c, m, n);
  if (beta == 0.0) C.setZero();
  else if (beta != 1.0) C *= beta;
  ConstMap A(a, trans_a ? k : m, trans_a ? m : k);
  ConstMap B(b, trans_b ? n : k, trans_b ? k : n);
  if (!trans_a && !trans_b) C.noalias() += alpha * A * B;
  else if (trans_a && !trans_b) C.noalias() += alpha * A.transpose() * B;
  else if (!trans_a && trans_b) C.noalias() += alpha * A * B.transpose();
  else C.noalias() += alpha * A.transpose() * B.transpose();
}

}  // namespace gemm

void im2col(const double* image, int channels, int h, int w, const ConvSpec& s,
            double* columns) {
  const int ho = s.out_h(h), wo = s.out_w(w);
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    const double* src = image + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < s.kernel_h; ++ky) {
      for (int kx = 0; kx < s.kernel_w; ++kx) {
        double* dst = columns + ((static_cast<std::size_t>(c) * s.kernel_h + ky) * s.kernel_w + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.padding + ky * s.dilation;
          double* row = dst + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + wo, 0.0);
            continue;
          }
          const double* line = src + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.padding + kx * s.dilation;
            row[ox] = (ix >= 0 && ix < w) ? line[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* columns, int channels, int h, int w, const ConvSpec& s,
            double* image) {
  const int ho = s.out_h(h), wo = s.out_w(w);
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    double* dst = image + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < s.kernel_h; ++ky) {
      for (int kx = 0; kx < s.kernel_w; ++kx) {
        const double* src = columns + ((static_cast<std::size_t>(c) * s.kernel_h + ky) * s.kernel_w + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.padding + ky * s.dilation;
          if (iy < 0 || iy >= h) continue;
          const double* row = src + static_cast<std::size_t>(oy) * wo;
          double* line = dst + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.padding + kx * s.dilation;
            if (ix >= 0 && ix < w) line[ix] += row[ox];
          }
        }
      }
    }
  }
}

namespace {

void check_conv_operands(const Tensor& input, const Tensor& weights, const Tensor& bias,
                         const ConvSpec& spec, bool transposed) {
  const Shape& x = input.shape();
  const Shape& k = weights.shape();
  if (spec.in_channels <= 0 || spec.out_channels <= 0 || spec.kernel_h <= 0 ||
      spec.kernel_w <= 0 || spec.stride <= 0 || spec.dilation <= 0 || spec.padding < 0)
    throw ShapeError("invalid ConvSpec");
  if (x.c != spec.in_channels)
    throw ShapeError("input has " + std::to_string(x.c) + " channels, spec expects " +
                     std::to_string(spec.in_channels));
  const Shape want = transposed
                         ? Shape{spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w}
                         : Shape{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w};
  if (!(k == want))
    throw ShapeError("weights shape " + k.str() + " does not match expected " + want.str());
  if (bias.defined() && !(bias.shape() == Shape{1, spec.out_channels, 1, 1}))
    throw ShapeError("bias shape " + bias.shape().str() + " does not match C_out " +
                     std::to_string(spec.out_channels));
  if (spec.has_bias != bias.defined())
    throw ShapeError("bias presence disagrees with ConvSpec.has_bias");
}

bool is_pointwise(const ConvSpec& s) {
  return s.kernel_h == 1 && s.kernel_w == 1 && s.stride == 1 && s.padding == 0;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const ConvSpec& spec) {
  check_conv_operands(input, weights, bias, spec, false);
  const Shape xs = input.shape();
  const int ho = spec.out_h(xs.h), wo = spec.out_w(xs.w);
  if (ho < 1 || wo < 1)
    throw ShapeError("conv2d output would be empty for input " + xs.str());
  const int kdim = spec.in_channels * spec.kernel_h * spec.kernel_w;
  const int pix = ho * wo;
  Tensor out(Shape{xs.n, spec.out_channels, ho, wo});
  const bool pointwise = is_pointwise(spec);
  std::vector<double> cols(pointwise ? 0 : static_cast<std::size_t>(kdim) * pix);
  const double* x = input.data().data();
  const double* wt = weights.data().data();
  double* y = out.mutable_data().data();
  const std::size_t in_stride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
  const std::size_t out_stride = static_cast<std::size_t>(spec.out_channels) * pix;
  for (int n = 0; n < xs.n; ++n) {
    const double* src = x + n * in_stride;
    if (!pointwise) {
      im2col(src, xs.c, xs.h, xs.w, spec, cols.data());
      src = cols.data();
    }
    double* dst = y + n * out_stride;
    gemm::run(false, false, spec.out_channels, pix, kdim, 1.0, wt, src, 0.0, dst);
    if (bias.defined()) {
      auto b = bias.data();
      for (int o = 0; o < spec.out_channels; ++o)
        for (int p = 0; p < pix; ++p) dst[static_cast<std::size_t>(o) * pix + p] += b[o];
    }
  }
  record(out, {input, weights, bias}, [spec, xs, ho, wo, kdim, pix, pointwise](detail::TensorImpl& self) {
    auto* in = self.parents[0].get();
    auto* wn = self.parents[1].get();
    auto* bn = self.parents[2].get();
    const double* gy = self.grad.data();
    const std::size_t in_stride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
    const std::size_t out_stride = static_cast<std::size_t>(spec.out_channels) * pix;
    std::vector<double> cols(static_cast<std::size_t>(kdim) * pix);
    for (int n = 0; n < xs.n; ++n) {
      const double* g = gy + n * out_stride;
      if (wn->requires_grad) {
        const double* src = in->data.data() + n * in_stride;
        if (!pointwise) {
          im2col(src, xs.c, xs.h, xs.w, spec, cols.data());
          src = cols.data();
        }
        gemm::run(false, true, spec.out_channels, kdim, pix, 1.0, g, src, 1.0,
                  grad_of(*wn).data());
      }
      if (bn && bn->requires_grad) {
        auto gb = grad_of(*bn);
        for (int o = 0; o < spec.out_channels; ++o) {
          double acc = 0.0;
          for (int p = 0; p < pix; ++p) acc += g[static_cast<std::size_t>(o) * pix + p];
          gb[o] += acc;
        }
      }
      if (in->requires_grad) {
        double* gx = grad_of(*in).data() + n * in_stride;
        if (pointwise) {
          gemm::run(true, false, kdim, pix, spec.out_channels, 1.0, wn->data.data(), g, 1.0, gx);
        } else {
          gemm::run(true, false, kdim, pix, spec.out_channels, 1.0, wn->data.data(), g, 0.0,
                    cols.data());
          col2im(cols.data(), xs.c, xs.h, xs.w, spec, gx);
        }
      }
    }
  });
  return out;
}

Tensor deconv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
                const ConvSpec& spec) {
  check_conv_operands(input, weights, bias, spec, true);
  const Shape xs = input.shape();
  const int ho = spec.deconv_out_h(xs.h), wo = spec.deconv_out_w(xs.w);
  if (ho < 1 || wo < 1)
    throw ShapeError("deconv2d output would be empty for input " + xs.str());
  // Columns live on the input grid: the adjoint conv of (ho, wo) with the same
  // spec must land back on (xs.h, xs.w).
  if (spec.out_h(ho) != xs.h || spec.out_w(wo) != xs.w)
    throw ShapeError("deconv2d spec is not invertible for input " + xs.str());
  const int cout = spec.out_channels;
  const int kdim = cout * spec.kernel_h * spec.kernel_w;
  const int pix = xs.h * xs.w;
  Tensor out(Shape{xs.n, cout, ho, wo});
  std::vector<double> cols(static_cast<std::size_t>(kdim) * pix);
  const std::size_t in_stride = static_cast<std::size_t>(xs.c) * pix;
  const std::size_t out_stride = static_cast<std::size_t>(cout) * ho * wo;
  for (int n = 0; n < xs.n; ++n) {
    gemm::run(true, false, kdim, pix, xs.c, 1.0, weights.data().data(),
              input.data().data() + n * in_stride, 0.0, cols.data());
    double* dst = out.mutable_data().data() + n * out_stride;
    col2im(cols.data(), cout, ho, wo, spec, dst);
    if (bias.defined()) {
      auto b = bias.data();
      for (int o = 0; o < cout; ++o)
        for (int p = 0; p < ho * wo; ++p) dst[static_cast<std::size_t>(o) * ho * wo + p] += b[o];
    }
  }
  record(out, {input, weights, bias}, [spec, xs, ho, wo, kdim, pix, cout](detail::TensorImpl& self) {
    auto* in = self.parents[0].get();
    auto* wn = self.parents[1].get();
    auto* bn = self.parents[2].get();
    const std::size_t in_stride = static_cast<std::size_t>(xs.c) * pix;
    const std::size_t out_stride = static_cast<std::size_t>(cout) * ho * wo;
    std::vector<double> cols(static_cast<std::size_t>(kdim) * pix);
    for (int n = 0; n < xs.n; ++n) {
      const double* g = self.grad.data() + n * out_stride;
      im2col(g, cout, ho, wo, spec, cols.data());
      if (in->requires_grad)
        gemm::run(false, false, xs.c, pix, kdim, 1.0, wn->data.data(), cols.data(), 1.0,
                  grad_of(*in).data() + n * in_stride);
      if (wn->requires_grad)
        gemm::run(false, true, xs.c, kdim, pix, 1.0, in->data.data() + n * in_stride,
                  cols.data(), 1.0, grad_of(*wn).data());
      if (bn && bn->requires_grad) {
        auto gb = grad_of(*bn);
        for (int o = 0; o < cout; ++o) {
          double acc = 0.0;
          for (int p = 0; p < ho * wo; ++p) acc += g[static_cast<std::size_t>(o) * ho * wo + p];
          gb[o] += acc;
        }
      }
    }
  });
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  auto src = x.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
  record(out, {x}, [](detail::TensorImpl& self) {
    auto* p = self.parents[0].get();
    auto g = grad_of(*p);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p->data[i] > 0.0) g[i] += self.grad[i];
  });
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  auto src = x.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = src[i];
    // Split by sign so exp never overflows.
    dst[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  record(out, {x}, [](detail::TensorImpl& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = self.data[i];
      g[i] += self.grad[i] * s * (1.0 - s);
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape()))
    throw ShapeError("add: shapes " + a.shape().str() + " and " + b.shape().str());
  Tensor out(a.shape());
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a.data()[i] + b.data()[i];
  record(out, {a, b}, [](detail::TensorImpl& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto g = grad_of(*p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape()))
    throw ShapeError("mul: shapes " + a.shape().str() + " and " + b.shape().str());
  Tensor out(a.shape());
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a.data()[i] * b.data()[i];
  record(out, {a, b}, [](detail::TensorImpl& self) {
    auto* pa = self.parents[0].get();
    auto* pb = self.parents[1].get();
    if (pa->requires_grad) {
      auto g = grad_of(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      auto g = grad_of(*pb);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->data[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out(x.shape());
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = x.data()[i] * factor;
  record(out, {x}, [factor](detail::TensorImpl& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  record(out, {x}, [](detail::TensorImpl& self) {
    auto g = grad_of(*self.parents[0]);
    for (double& v : g) v += self.grad[0];
  });
  return out;
}

namespace {

// Views a tensor as (outer, axis extent, inner) around `axis`.
struct AxisView {
  std::size_t outer, extent, inner;
};

AxisView axis_view(const Shape& s, int axis) {
  std::size_t dims[4] = {static_cast<std::size_t>(s.n), static_cast<std::size_t>(s.c),
                         static_cast<std::size_t>(s.h), static_cast<std::size_t>(s.w)};
  AxisView v{1, dims[axis], 1};
  for (int i = 0; i < axis; ++i) v.outer *= dims[i];
  for (int i = axis + 1; i < 4; ++i) v.inner *= dims[i];
  return v;
}

Shape with_axis(Shape s, int axis, int extent) {
  switch (axis) {
    case 0: s.n = extent; break;
    case 1: s.c = extent; break;
    case 2: s.h = extent; break;
    default: s.w = extent; break;
  }
  return s;
}

}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  if (axis < 0 || axis > 3) throw ShapeError("concat axis out of range");
  Shape base = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (!(with_axis(s, axis, 0) == with_axis(base, axis, 0)))
      throw ShapeError("concat: incompatible shapes " + base.str() + " and " + s.str());
    total += s[axis];
  }
  Tensor out(with_axis(base, axis, total));
  const AxisView ov = axis_view(out.shape(), axis);
  std::vector<std::size_t> starts;
  std::size_t offset = 0;
  auto dst = out.mutable_data();
  for (const auto& p : parts) {
    const AxisView pv = axis_view(p.shape(), axis);
    starts.push_back(offset);
    const std::size_t chunk = pv.extent * pv.inner;
    for (std::size_t o = 0; o < pv.outer; ++o)
      std::copy_n(p.data().data() + o * chunk, chunk,
                  dst.data() + o * ov.extent * ov.inner + offset * ov.inner);
    offset += pv.extent;
  }
  record(out, parts, [axis, starts, ov](detail::TensorImpl& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      auto* p = self.parents[i].get();
      if (!p->requires_grad) continue;
      const AxisView pv = axis_view(p->shape, axis);
      const std::size_t chunk = pv.extent * pv.inner;
      auto g = grad_of(*p);
      for (std::size_t o = 0; o < pv.outer; ++o) {
        const double* src = self.grad.data() + o * ov.extent * ov.inner + starts[i] * ov.inner;
        double* d = g.data() + o * chunk;
        for (std::size_t j = 0; j < chunk; ++j) d[j] += src[j];
      }
    }
  });
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& parts) { return concat(parts, 1); }

Tensor slice(const Tensor& x, int axis, int begin, int end) {
  if (axis < 0 || axis > 3) throw ShapeError("slice axis out of range");
  const Shape xs = x.shape();
  if (begin < 0 || end > xs[axis] || begin >= end)
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + xs.str());
  Tensor out(with_axis(xs, axis, end - begin));
  const AxisView xv = axis_view(xs, axis);
  const std::size_t chunk = static_cast<std::size_t>(end - begin) * xv.inner;
  auto dst = out.mutable_data();
  for (std::size_t o = 0; o < xv.outer; ++o)
    std::copy_n(x.data().data() + o * xv.extent * xv.inner + begin * xv.inner, chunk,
                dst.data() + o * chunk);
  record(out, {x}, [xv, chunk, begin](detail::TensorImpl& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t o = 0; o < xv.outer; ++o) {
      double* d = g.data() + o * xv.extent * xv.inner + begin * xv.inner;
      const double* s = self.grad.data() + o * chunk;
      for (std::size_t j = 0; j < chunk; ++j) d[j] += s[j];
    }
  });
  return out;
}

std::vector<Tensor> split_channels(const Tensor& x, int groups) {
  if (groups <= 0 || x.shape().c % groups != 0)
    throw ShapeError("cannot split " + std::to_string(x.shape().c) + " channels into " +
                     std::to_string(groups) + " groups");
  const int c = x.shape().c / groups;
  std::vector<Tensor> out;
  for (int g = 0; g < groups; ++g) out.push_back(slice(x, 1, g * c, (g + 1) * c));
  return out;
}

Tensor maxpool2d(const Tensor& x, int kernel, int stride) {
  const Shape xs = x.shape();
  const int ho = (xs.h - kernel) / stride + 1, wo = (xs.w - kernel) / stride + 1;
  if (ho < 1 || wo < 1) throw ShapeError("maxpool2d output would be empty");
  Tensor out(Shape{xs.n, xs.c, ho, wo});
  std::vector<std::size_t> argmax(out.numel());
  auto src = x.data();
  auto dst = out.mutable_data();
  std::size_t o = 0;
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t where = 0;
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx) {
              const std::size_t i = x.index(n, c, oy * stride + ky, ox * stride + kx);
              if (src[i] > best) {
                best = src[i];
                where = i;
              }
            }
          dst[o] = best;
          argmax[o] = where;
        }
  record(out, {x}, [argmax = std::move(argmax)](detail::TensorImpl& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
  });
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  const Shape xs = x.shape();
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  Tensor out(Shape{xs.n, xs.c, 1, 1});
  auto dst = out.mutable_data();
  for (std::size_t p = 0; p < dst.size(); ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += x.data()[p * plane + i];
    dst[p] = acc / static_cast<double>(plane);
  }
  record(out, {x}, [plane](detail::TensorImpl& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t p = 0; p < self.grad.size(); ++p) {
      const double v = self.grad[p] / static_cast<double>(plane);
      for (std::size_t i = 0; i < plane; ++i) g[p * plane + i] += v;
    }
  });
  return out;
}

Tensor channel_scale(const Tensor& x, const Tensor& s) {
  const Shape xs = x.shape();
  if (!(s.shape() == Shape{xs.n, xs.c, 1, 1}))
    throw ShapeError("channel_scale: scale shape " + s.shape().str() + " vs input " + xs.str());
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  Tensor out(xs);
  auto dst = out.mutable_data();
  for (std::size_t p = 0; p < s.numel(); ++p)
    for (std::size_t i = 0; i < plane; ++i)
      dst[p * plane + i] = x.data()[p * plane + i] * s.data()[p];
  record(out, {x, s}, [plane](detail::TensorImpl& self) {
    auto* px = self.parents[0].get();
    auto* ps = self.parents[1].get();
    const std::size_t planes = ps->data.size();
    if (px->requires_grad) {
      auto g = grad_of(*px);
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < plane; ++i)
          g[p * plane + i] += self.grad[p * plane + i] * ps->data[p];
    }
    if (ps->requires_grad) {
      auto g = grad_of(*ps);
      for (std::size_t p = 0; p < planes; ++p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i)
          acc += self.grad[p * plane + i] * px->data[p * plane + i];
        g[p] += acc;
      }
    }
  });
  return out;
}

Tensor group_softmax(const Tensor& logits, int groups) {
  const Shape ls = logits.shape();
  if (groups < 2) throw ShapeError("group_softmax needs at least two groups");
  if (ls.h != 1 || ls.w != 1 || ls.c % groups != 0)
    throw ShapeError("group_softmax: bad logits shape " + ls.str());
  const int c = ls.c / groups;
  Tensor out(ls);
  auto src = logits.data();
  auto dst = out.mutable_data();
  for (int n = 0; n < ls.n; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * ls.c;
    for (int j = 0; j < c; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int g = 0; g < groups; ++g) mx = std::max(mx, src[base + g * c + j]);
      double z = 0.0;
      for (int g = 0; g < groups; ++g) z += std::exp(src[base + g * c + j] - mx);
      for (int g = 0; g < groups; ++g) dst[base + g * c + j] = std::exp(src[base + g * c + j] - mx) / z;
    }
  }
  record(out, {logits}, [groups, c, ls](detail::TensorImpl& self) {
    auto g = grad_of(*self.parents[0]);
    for (int n = 0; n < ls.n; ++n) {
      const std::size_t base = static_cast<std::size_t>(n) * ls.c;
      for (int j = 0; j < c; ++j) {
        double dot = 0.0;
        for (int r = 0; r < groups; ++r)
          dot += self.grad[base + r * c + j] * self.data[base + r * c + j];
        for (int r = 0; r < groups; ++r) {
          const std::size_t i = base + r * c + j;
          g[i] += self.data[i] * (self.grad[i] - dot);
        }
      }
    }
  });
  return out;
}

Tensor anchor_rows(const Tensor& map, int values_per_anchor) {
  const Shape ms = map.shape();
  if (values_per_anchor <= 0 || ms.c % values_per_anchor != 0)
    throw ShapeError("anchor_rows: channels " + std::to_string(ms.c) + " not divisible by " +
                     std::to_string(values_per_anchor));
  const int anchors = ms.c / values_per_anchor;
  const int rows = ms.h * ms.w * anchors;
  Tensor out(Shape{ms.n, 1, rows, values_per_anchor});
  // Gather index for every output element, reused by backward.
  std::vector<std::size_t> src_index(out.numel());
  std::size_t o = 0;
  for (int n = 0; n < ms.n; ++n)
    for (int y = 0; y < ms.h; ++y)
      for (int x = 0; x < ms.w; ++x)
        for (int a = 0; a < anchors; ++a)
          for (int v = 0; v < values_per_anchor; ++v, ++o)
            src_index[o] = map.index(n, a * values_per_anchor + v, y, x);
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = map.data()[src_index[i]];
  record(out, {map}, [src_index = std::move(src_index)](detail::TensorImpl& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < src_index.size(); ++i) g[src_index[i]] += self.grad[i];
  });
  return out;
}

BilinearTap bilinear_tap(double y, double x, int h, int w) {
  BilinearTap t{0, 0, 0.0, 0.0, false};
  if (!(y > -1.0 && y < h && x > -1.0 && x < w)) return t;
  const double fy = std::floor(y), fx = std::floor(x);
  t.y0 = static_cast<int>(fy);
  t.x0 = static_cast<int>(fx);
  t.wy1 = y - fy;
  t.wx1 = x - fx;
  t.inside = true;
  return t;
}

namespace {
inline double pix(const double* plane, int h, int w, int y, int x) {
  return (y >= 0 && y < h && x >= 0 && x < w) ? plane[static_cast<std::size_t>(y) * w + x] : 0.0;
}
}  // namespace

double bilinear_value(const double* plane, int h, int w, const BilinearTap& t) {
  if (!t.inside) return 0.0;
  const double v00 = pix(plane, h, w, t.y0, t.x0), v01 = pix(plane, h, w, t.y0, t.x0 + 1);
  const double v10 = pix(plane, h, w, t.y0 + 1, t.x0), v11 = pix(plane, h, w, t.y0 + 1, t.x0 + 1);
  const double wy0 = 1.0 - t.wy1, wx0 = 1.0 - t.wx1;
  return wy0 * (wx0 * v00 + t.wx1 * v01) + t.wy1 * (wx0 * v10 + t.wx1 * v11);
}

std::pair<double, double> bilinear_backward(const double* plane, double* plane_grad, int h,
                                            int w, const BilinearTap& t, double g) {
  if (!t.inside) return {0.0, 0.0};
  const double wy0 = 1.0 - t.wy1, wx0 = 1.0 - t.wx1;
  auto scatter = [&](int y, int x, double weight) {
    if (plane_grad && y >= 0 && y < h && x >= 0 && x < w)
      plane_grad[static_cast<std::size_t>(y) * w + x] += g * weight;
  };
  scatter(t.y0, t.x0, wy0 * wx0);
  scatter(t.y0, t.x0 + 1, wy0 * t.wx1);
  scatter(t.y0 + 1, t.x0, t.wy1 * wx0);
  scatter(t.y0 + 1, t.x0 + 1, t.wy1 * t.wx1);
  const double v00 = pix(plane, h, w, t.y0, t.x0), v01 = pix(plane, h, w, t.y0, t.x0 + 1);
  const double v10 = pix(plane, h, w, t.y0 + 1, t.x0), v11 = pix(plane, h, w, t.y0 + 1, t.x0 + 1);
  const double dy = wx0 * (v10 - v00) + t.wx1 * (v11 - v01);
  const double dx = wy0 * (v01 - v00) + t.wy1 * (v11 - v10);
  return {g * dy, g * dx};
}

double bilinear_sample(const Tensor& input, double x, double y, int channel, int batch) {
  const Shape s = input.shape();
  const double* plane = input.data().data() + input.index(batch, channel, 0, 0);
  return bilinear_value(plane, s.h, s.w, bilinear_tap(y, x, s.h, s.w));
}

}  // namespace afran
