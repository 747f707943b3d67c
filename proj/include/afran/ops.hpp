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

#include <optional>
#include <vector>

#include "afran/tensor.hpp"

namespace afran {

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  bool has_bias = true;

  int out_h(int h) const {
    return (h + 2 * padding - dilation * (kernel_h - 1) - 1) / stride + 1;
  }
  int out_w(int w) const {
    return (w + 2 * padding - dilation * (kernel_w - 1) - 1) / stride + 1;
  }
  /// Transposed-convolution output extent.
  int deconv_out_h(int h) const {
    return (h - 1) * stride - 2 * padding + dilation * (kernel_h - 1) + 1;
  }
  int deconv_out_w(int w) const {
    return (w - 1) * stride - 2 * padding + dilation * (kernel_w - 1) + 1;
  }
};

// Convolutions. Weights are (C_out, C_in, k_h, k_w) for conv2d and
// (C_in, C_out, k_h, k_w) for deconv2d. `bias` may be an undefined Tensor;
// when defined its shape is (1, C_out, 1, 1).
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const ConvSpec& spec);
Tensor deconv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
                const ConvSpec& spec);

// Element-wise.
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// Scalar (1,1,1,1) total of all elements.
Tensor sum(const Tensor& x);

// Structural.
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice(const Tensor& x, int axis, int begin, int end);
/// Splits along channels into equal groups.
std::vector<Tensor> split_channels(const Tensor& x, int groups);

// Pooling and attention helpers.
Tensor maxpool2d(const Tensor& x, int kernel, int stride);
/// Adaptive average pooling to 1x1: (N,C,H,W) -> (N,C,1,1).
Tensor global_avg_pool(const Tensor& x);
/// Multiplies each (n,c) plane of x by s[n,c]; s has shape (N,C,1,1).
Tensor channel_scale(const Tensor& x, const Tensor& s);
/// Softmax over `groups` for every channel j of a (N, groups*c, 1, 1) tensor
/// laid out group-major (index g*c + j).
Tensor group_softmax(const Tensor& logits, int groups);

/// Reorders a prediction map (N, A*V, H, W) into anchor rows
/// (N, 1, H*W*A, V) with row (y*W + x)*A + a.
Tensor anchor_rows(const Tensor& map, int values_per_anchor);

/// Bilinear interpolation of input[batch, channel] at index-space (y, x)
/// with zero padding outside the grid.
double bilinear_sample(const Tensor& input, double x, double y, int channel,
                       int batch);

/// Raw-plane bilinear kernel shared by the deformable ops.
struct BilinearTap {
  int y0, x0;
  double wy1, wx1;  // fractional parts
  bool inside;      // false when the point is beyond the padded border
};
BilinearTap bilinear_tap(double y, double x, int h, int w);
double bilinear_value(const double* plane, int h, int w, const BilinearTap& t);
/// Scatters `g` onto the plane gradient and returns (dvalue/dy, dvalue/dx).
std::pair<double, double> bilinear_backward(const double* plane, double* plane_grad,
                                            int h, int w, const BilinearTap& t,
                                            double g);

namespace gemm {
// Row-major C = alpha*op(A)*op(B) + beta*C. Thin Eigen wrapper.
void run(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
         const double* a, const double* b, double beta, double* c);
}  // namespace gemm

void im2col(const double* image, int channels, int h, int w, const ConvSpec& spec,
            double* columns);
void col2im(const double* columns, int channels, int h, int w, const ConvSpec& spec,
            double* image);

}  // namespace afran
