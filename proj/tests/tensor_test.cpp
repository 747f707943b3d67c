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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "afran/grad_check.hpp"
#include "afran/ops.hpp"
#include "oracles.hpp"

namespace afran {
namespace {

using oracle::random_tensor;

Tensor bias_for(int c, std::mt19937_64& rng) { return random_tensor(Shape{1, c, 1, 1}, rng); }

TEST(Conv2d, IdentityKernelReturnsInput) {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor(Shape{1, 1, 3, 3}, rng);
  Tensor w(Shape{1, 1, 1, 1}, 1.0);
  ConvSpec spec{1, 1, 1, 1, 1, 0, 1, false};
  Tensor y = conv2d(x, w, Tensor(), spec);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv2d, OnesKernelSums) {
  Tensor x(Shape{1, 1, 3, 3}, 1.0);
  Tensor w(Shape{1, 1, 3, 3}, 1.0);
  Tensor y = conv2d(x, w, Tensor(), ConvSpec{1, 1, 3, 3, 1, 0, 1, false});
  ASSERT_EQ(y.numel(), 1u);
  EXPECT_DOUBLE_EQ(y.item(), 9.0);
}

TEST(Conv2d, MatchesNaiveLoopsOnReferenceInstance) {
  std::mt19937_64 rng(7);
  Tensor x = random_tensor(Shape{2, 3, 8, 8}, rng);
  Tensor w = random_tensor(Shape{4, 3, 3, 3}, rng);
  Tensor b = bias_for(4, rng);
  ConvSpec spec{3, 4, 3, 3, 1, 1, 1, true};
  EXPECT_LT(oracle::max_abs_diff(conv2d(x, w, b, spec), oracle::conv2d_naive(x, w, b, spec)), 1e-9);
}

TEST(Conv2d, MatchesNaiveLoopsOnRandomInstances) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> small(1, 4), spatial(4, 12), k(1, 3), st(1, 2), pd(0, 2), dl(1, 2);
  for (int trial = 0; trial < 60; ++trial) {
    ConvSpec spec{small(rng), small(rng), k(rng), k(rng), st(rng), pd(rng), dl(rng), trial % 2 == 0};
    Shape xs{small(rng), spec.in_channels, spatial(rng), spatial(rng)};
    if (spec.out_h(xs.h) < 1 || spec.out_w(xs.w) < 1) continue;
    Tensor x = random_tensor(xs, rng);
    Tensor w = random_tensor(Shape{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w}, rng);
    Tensor b = spec.has_bias ? bias_for(spec.out_channels, rng) : Tensor();
    EXPECT_LT(oracle::max_abs_diff(conv2d(x, w, b, spec), oracle::conv2d_naive(x, w, b, spec)), 1e-9)
        << "trial " << trial;
  }
}

TEST(Conv2d, RejectsShapeMismatch) {
  Tensor x(Shape{1, 2, 5, 5});
  Tensor w(Shape{4, 3, 3, 3});
  EXPECT_THROW(conv2d(x, w, Tensor(), ConvSpec{2, 4, 3, 3, 1, 0, 1, false}), ShapeError);
  EXPECT_THROW(conv2d(x, Tensor(Shape{4, 2, 3, 3}), Tensor(), ConvSpec{3, 4, 3, 3, 1, 0, 1, false}),
               ShapeError);
}

TEST(Conv2d, RejectsEmptyOutput) {
  Tensor x(Shape{1, 1, 2, 2});
  Tensor w(Shape{1, 1, 3, 3});
  EXPECT_THROW(conv2d(x, w, Tensor(), ConvSpec{1, 1, 3, 3, 1, 0, 1, false}), ShapeError);
}

TEST(Conv2d, BitDeterministic) {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor(Shape{2, 3, 9, 9}, rng);
  Tensor w = random_tensor(Shape{5, 3, 3, 3}, rng);
  ConvSpec spec{3, 5, 3, 3, 2, 1, 1, false};
  Tensor a = conv2d(x, w, Tensor(), spec), b = conv2d(x, w, Tensor(), spec);
  EXPECT_EQ(std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)), 0);
}

const ConvSpec kUpsample{1, 1, 4, 4, 2, 1, 1, false};

TEST(Deconv2d, DoublesSpatialSize) {
  Tensor y = deconv2d(Tensor(Shape{1, 1, 20, 20}), Tensor(Shape{1, 1, 4, 4}), Tensor(), kUpsample);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 40, 40}));
}

TEST(Deconv2d, DeltaInputStampsKernel) {
  Tensor x(Shape{1, 1, 5, 5});
  x.mutable_data()[x.index(0, 0, 2, 2)] = 1.0;
  Tensor y = deconv2d(x, Tensor(Shape{1, 1, 4, 4}, 1.0), Tensor(), kUpsample);
  // Input (2,2) lands on output rows/cols 2*2-1 .. 2*2+2.
  for (int oy = 0; oy < 10; ++oy)
    for (int ox = 0; ox < 10; ++ox) {
      const bool inside = oy >= 3 && oy <= 6 && ox >= 3 && ox <= 6;
      EXPECT_EQ(y.at(0, 0, oy, ox), inside ? 1.0 : 0.0) << oy << "," << ox;
    }
}

TEST(Deconv2d, MatchesScatterOracle) {
  std::mt19937_64 rng(5);
  ConvSpec spec{3, 2, 4, 4, 2, 1, 1, false};
  Tensor x = random_tensor(Shape{2, 3, 5, 6}, rng);
  Tensor w = random_tensor(Shape{3, 2, 4, 4}, rng);
  EXPECT_LT(oracle::max_abs_diff(deconv2d(x, w, Tensor(), spec), oracle::deconv2d_scatter(x, w, spec)),
            1e-9);
}

TEST(Deconv2d, IsAdjointOfConv) {
  // deconv(y; W) == d/dx <conv(x; W), y>, with W shared as (C_y, C_x, k, k).
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const int cx = 2 + trial % 2, cy = 3;
    ConvSpec conv_spec{cx, cy, 4, 4, 2, 1, 1, false};
    ConvSpec deconv_spec{cy, cx, 4, 4, 2, 1, 1, false};
    Tensor w = random_tensor(Shape{cy, cx, 4, 4}, rng);
    Tensor x = random_tensor(Shape{1, cx, 8, 8}, rng);
    x.set_requires_grad(true);
    Tensor y = random_tensor(Shape{1, cy, 4, 4}, rng);
    Tensor inner = sum(mul(conv2d(x, w, Tensor(), conv_spec), y));
    backward(inner);
    Tensor d = deconv2d(y, w, Tensor(), deconv_spec);
    ASSERT_EQ(d.shape(), x.shape());
    double m = 0.0;
    for (std::size_t i = 0; i < d.numel(); ++i) m = std::max(m, std::abs(d.data()[i] - x.grad()[i]));
    EXPECT_LT(m, 1e-9);
  }
}

TEST(Elementwise, ReluSigmoidExamples) {
  Tensor x(Shape{1, 1, 1, 3}, std::vector<double>{-1.0, 0.0, 2.0});
  Tensor r = relu(x);
  EXPECT_EQ(r.data()[0], 0.0);
  EXPECT_EQ(r.data()[1], 0.0);
  EXPECT_EQ(r.data()[2], 2.0);
  EXPECT_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_THROW(add(Tensor(Shape{1, 1, 2, 2}), Tensor(Shape{1, 1, 2, 3})), ShapeError);
  EXPECT_THROW(mul(Tensor(Shape{1, 2, 2, 2}), Tensor(Shape{1, 1, 2, 2})), ShapeError);
}

TEST(Elementwise, ConcatThenSplitIsBitExact) {
  std::mt19937_64 rng(2);
  Tensor a = random_tensor(Shape{2, 2, 3, 4}, rng);
  Tensor b = random_tensor(Shape{2, 3, 3, 4}, rng);
  Tensor c = concat_channels({a, b});
  EXPECT_EQ(c.shape(), (Shape{2, 5, 3, 4}));
  Tensor a2 = slice(c, 1, 0, 2), b2 = slice(c, 1, 2, 5);
  EXPECT_EQ(std::memcmp(a.data().data(), a2.data().data(), a.numel() * sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(b.data().data(), b2.data().data(), b.numel() * sizeof(double)), 0);
  EXPECT_THROW(concat_channels({a, Tensor(Shape{2, 1, 3, 5})}), ShapeError);
}

TEST(Attention, PoolAndGroupSoftmax) {
  Tensor x(Shape{1, 2, 4, 5}, 3.25);
  Tensor p = global_avg_pool(x);
  EXPECT_EQ(p.shape(), (Shape{1, 2, 1, 1}));
  EXPECT_DOUBLE_EQ(p.data()[0], 3.25);

  Tensor same(Shape{1, 2, 1, 1}, std::vector<double>{0.3, 0.3});
  Tensor s = group_softmax(same, 2);
  EXPECT_DOUBLE_EQ(s.data()[0], 0.5);
  EXPECT_DOUBLE_EQ(s.data()[1], 0.5);

  Tensor logits(Shape{1, 2, 1, 1}, std::vector<double>{1.0, 0.0});
  Tensor a = group_softmax(logits, 2);
  EXPECT_NEAR(a.data()[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
  EXPECT_NEAR(a.data()[0], 0.7311, 1e-4);
  EXPECT_NEAR(a.data()[1], 0.2689, 1e-4);
  EXPECT_THROW(group_softmax(logits, 1), ShapeError);
}

TEST(Bilinear, GridMidpointAndPadding) {
  Tensor x(Shape{1, 1, 2, 2}, std::vector<double>{0.0, 0.0, 2.0, 2.0});
  EXPECT_EQ(bilinear_sample(x, 0.0, 1.0, 0, 0), 2.0);
  EXPECT_EQ(bilinear_sample(x, 1.0, 0.0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(bilinear_sample(x, 0.5, 0.5, 0, 0), 1.0);
  EXPECT_EQ(bilinear_sample(x, -1.5, 0.5, 0, 0), 0.0);
  EXPECT_EQ(bilinear_sample(x, 0.5, 2.0, 0, 0), 0.0);
  // Half a pixel beyond the border blends with the zero padding.
  EXPECT_DOUBLE_EQ(bilinear_sample(x, 0.0, 1.5, 0, 0), 1.0);
}

TEST(AnchorRows, ReordersPerCell) {
  // 2 anchors x 3 values on a 1x2 grid.
  Tensor m(Shape{1, 6, 1, 2});
  for (int c = 0; c < 6; ++c)
    for (int x = 0; x < 2; ++x) m.mutable_data()[m.index(0, c, 0, x)] = 10 * x + c;
  Tensor r = anchor_rows(m, 3);
  EXPECT_EQ(r.shape(), (Shape{1, 1, 4, 3}));
  EXPECT_EQ(r.at(0, 0, 1, 2), 5.0);   // cell 0, anchor 1, value 2
  EXPECT_EQ(r.at(0, 0, 2, 0), 10.0);  // cell 1, anchor 0
}

TEST(GradCheck, ConvWeightedSum) {
  std::mt19937_64 rng(21);
  Tensor x = random_tensor(Shape{1, 2, 5, 5}, rng);
  Tensor w = random_tensor(Shape{3, 2, 3, 3}, rng);
  Tensor b = bias_for(3, rng);
  ConvSpec spec{2, 3, 3, 3, 1, 1, 1, true};
  auto res = grad_check([&] { return sum(conv2d(x, w, b, spec)); }, {x, w, b});
  EXPECT_TRUE(res.ok(1e-6)) << res.max_rel_error;
  Tensor r = random_tensor(Shape{1, 3, 2, 2}, rng);
  ConvSpec strided{2, 3, 3, 3, 2, 1, 2, true};
  auto res2 = grad_check([&] { return sum(mul(conv2d(x, w, b, strided), r)); }, {x, w, b});
  EXPECT_TRUE(res2.ok(1e-6)) << res2.max_rel_error;
}

TEST(GradCheck, ReluAwayFromKink) {
  std::mt19937_64 rng(4);
  Tensor x = random_tensor(Shape{1, 2, 4, 4}, rng);
  for (double& v : x.mutable_data()) v += v >= 0 ? 0.1 : -0.1;
  auto res = grad_check([&] { return sum(relu(x)); }, {x});
  EXPECT_TRUE(res.ok(1e-8)) << res.max_rel_error;
}

TEST(GradCheck, DeconvAndStructuralOps) {
  std::mt19937_64 rng(8);
  Tensor x = random_tensor(Shape{1, 2, 3, 3}, rng);
  Tensor w = random_tensor(Shape{2, 3, 4, 4}, rng);
  Tensor b = bias_for(3, rng);
  Tensor r = random_tensor(Shape{1, 3, 6, 6}, rng);
  ConvSpec spec{2, 3, 4, 4, 2, 1, 1, true};
  auto res = grad_check([&] { return sum(mul(deconv2d(x, w, b, spec), r)); }, {x, w, b});
  EXPECT_TRUE(res.ok(1e-6)) << res.max_rel_error;

  Tensor a = random_tensor(Shape{1, 4, 4, 4}, rng);
  Tensor s = random_tensor(Shape{1, 2, 1, 1}, rng);
  Tensor r2 = random_tensor(Shape{1, 2, 2, 2}, rng);
  auto res2 = grad_check(
      [&] {
        auto parts = split_channels(a, 2);
        Tensor pooled = maxpool2d(channel_scale(add(parts[0], parts[1]), sigmoid(s)), 2, 2);
        Tensor attn = group_softmax(global_avg_pool(a), 2);
        return add(sum(mul(pooled, r2)), sum(mul(attn, attn)));
      },
      {a, s});
  EXPECT_TRUE(res2.ok(1e-6)) << res2.max_rel_error;

  Tensor m = random_tensor(Shape{1, 6, 2, 3}, rng);
  Tensor r3 = random_tensor(Shape{1, 1, 12, 3}, rng);
  auto res3 = grad_check(
      [&] { return scale(sum(mul(concat({anchor_rows(m, 3), anchor_rows(m, 3)}, 2), concat({r3, r3}, 2))), 0.5); },
      {m});
  EXPECT_TRUE(res3.ok(1e-6)) << res3.max_rel_error;
}

}  // namespace
}  // namespace afran
