/*
 * Copyright 2026 The vbmask Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "vbmask/layers.h"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "vbmask/errors.h"
#include "vbmask/rng.h"

namespace vbmask {
namespace {

double Dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Direct nested-loop cross-correlation with zero padding.
Tensor BruteConv(const LayerSpec& c, const Tensor& w, const Tensor& x) {
  const Shape out = c.OutputShape(x.shape());
  const long H = static_cast<long>(x.shape()[1]), W = static_cast<long>(x.shape()[2]);
  Tensor y(out);
  for (std::size_t o = 0; o < out[0]; ++o) {
    for (std::size_t i = 0; i < out[1]; ++i) {
      for (std::size_t j = 0; j < out[2]; ++j) {
        double s = 0.0;
        for (std::size_t ci = 0; ci < c.in_channels; ++ci) {
          for (std::size_t u = 0; u < c.kernel; ++u) {
            for (std::size_t v = 0; v < c.kernel; ++v) {
              const long r = static_cast<long>(i * c.stride + u) - static_cast<long>(c.padding);
              const long q = static_cast<long>(j * c.stride + v) - static_cast<long>(c.padding);
              if (r < 0 || q < 0 || r >= H || q >= W) continue;
              s += w.at({o, ci, u, v}) *
                   x.at({ci, static_cast<std::size_t>(r), static_cast<std::size_t>(q)});
            }
          }
        }
        y.at({o, i, j}) = s;
      }
    }
  }
  return y;
}

struct Case {
  LayerSpec spec;
  Shape input;
};

std::vector<Case> LinearCases() {
  return {{LayerSpec::Dense(5, 3), {5}},
          {LayerSpec::Conv2d(1, 1, 3), {1, 5, 5}},
          {LayerSpec::Conv2d(2, 3, 3, 1, 1), {2, 5, 4}},
          {LayerSpec::Conv2d(3, 2, 2, 2, 0), {3, 6, 6}},
          {LayerSpec::Conv2d(2, 2, 3, 2, 1), {2, 7, 5}}};
}

TEST(Dense, HandMatmul) {
  const auto d = LayerSpec::Dense(2, 2);
  const Tensor w({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(LinearForward(d, w, Tensor({2}, {1, 1})), Tensor({2}, {3, 7}));
  EXPECT_EQ(LinearForward(d, w, Tensor({2})), Tensor({2}));
}

TEST(Dense, WeightGradIsOuterProduct) {
  const auto d = LayerSpec::Dense(2, 2);
  EXPECT_EQ(WeightGrad(d, Tensor({2}, {1, 0}), Tensor({2}, {2, 3})),
            Tensor({2, 2}, {2, 3, 0, 0}));
  EXPECT_EQ(WeightGrad(d, Tensor({2}), Tensor({2}, {2, 3})), Tensor({2, 2}));
}

TEST(Dense, InputGradIsTransposeProduct) {
  const auto d = LayerSpec::Dense(2, 2);
  const Tensor w({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(InputGrad(d, w, Tensor({2}, {1, 0})), Tensor({2}, {1, 2}));
  EXPECT_EQ(InputGrad(d, w, Tensor({2})), Tensor({2}));
}

TEST(Dense, RejectsShapeMismatch) {
  const auto d = LayerSpec::Dense(3, 2);
  EXPECT_THROW(LinearForward(d, Tensor({2, 3}), Tensor({4})), InvalidArgument);
  EXPECT_THROW(LinearForward(d, Tensor({3, 2}), Tensor({3})), InvalidArgument);
  EXPECT_THROW(WeightGrad(d, Tensor({3}), Tensor({3})), InvalidArgument);
  EXPECT_THROW(InputGrad(d, Tensor({2, 3}), Tensor({3})), InvalidArgument);
}

TEST(Conv2d, MatchesBruteForce) {
  Rng rng(11);
  for (const auto& c : LinearCases()) {
    if (c.spec.kind != LayerKind::kConv2d) continue;
    const Tensor w = rng.NormalTensor(c.spec.WeightShape(), 0.0, 1.0);
    const Tensor x = rng.NormalTensor(c.input, 0.0, 1.0);
    const Tensor y = LinearForward(c.spec, w, x);
    const Tensor ref = BruteConv(c.spec, w, x);
    ASSERT_EQ(y.shape(), ref.shape()) << c.spec.Describe();
    EXPECT_LT(MaxAbsDiff(y, ref), 1e-12) << c.spec.Describe();
  }
}

TEST(Conv2d, ThreeByThreeOnFiveByFive) {
  const auto c = LayerSpec::Conv2d(1, 1, 3);
  EXPECT_EQ(c.OutputShape({1, 5, 5}), (Shape{1, 3, 3}));
}

TEST(Linear, IsLinearInInput) {
  Rng rng(12);
  for (const auto& c : LinearCases()) {
    for (int t = 0; t < 20; ++t) {
      const Tensor w = rng.NormalTensor(c.spec.WeightShape(), 0.0, 1.0);
      const Tensor x1 = rng.NormalTensor(c.input, 0.0, 1.0);
      const Tensor x2 = rng.NormalTensor(c.input, 0.0, 1.0);
      const double a = rng.Normal(), b = rng.Normal();
      const Tensor lhs = LinearForward(c.spec, w, a * x1 + b * x2);
      const Tensor rhs = a * LinearForward(c.spec, w, x1) + b * LinearForward(c.spec, w, x2);
      const double scale = std::max(lhs.MaxAbs(), rhs.MaxAbs());
      EXPECT_LE(MaxAbsDiff(lhs, rhs), 1e-10 * scale) << c.spec.Describe();
    }
  }
}

// Scalar loss L = <g, f(W, x)>; central differences against the analytic grads.
TEST(Linear, GradientsMatchFiniteDifferences) {
  Rng rng(13);
  const double h = 1e-6;
  for (const auto& c : LinearCases()) {
    for (int t = 0; t < 20; ++t) {
      Tensor w = rng.NormalTensor(c.spec.WeightShape(), 0.0, 1.0);
      Tensor x = rng.NormalTensor(c.input, 0.0, 1.0);
      const Tensor g = rng.NormalTensor(c.spec.OutputShape(c.input), 0.0, 1.0);
      auto loss = [&] { return Dot(g, LinearForward(c.spec, w, x)); };

      const Tensor dw = WeightGrad(c.spec, g, x);
      Tensor fd_w(w.shape());
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double keep = w[i];
        w[i] = keep + h;
        const double up = loss();
        w[i] = keep - h;
        const double down = loss();
        w[i] = keep;
        fd_w[i] = (up - down) / (2 * h);
      }
      EXPECT_LT(RelError(dw, fd_w), 1e-5) << c.spec.Describe();

      const Tensor dx = InputGrad(c.spec, w, g, c.input);
      Tensor fd_x(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = loss();
        x[i] = keep - h;
        const double down = loss();
        x[i] = keep;
        fd_x[i] = (up - down) / (2 * h);
      }
      EXPECT_LT(RelError(dx, fd_x), 1e-5) << c.spec.Describe();
    }
  }
}

TEST(Linear, WeightGradIsBilinear) {
  Rng rng(14);
  for (const auto& c : LinearCases()) {
    const Shape out = c.spec.OutputShape(c.input);
    const Tensor d1 = rng.NormalTensor(out, 0.0, 1.0), d2 = rng.NormalTensor(out, 0.0, 1.0);
    const Tensor x = rng.NormalTensor(c.input, 0.0, 1.0);
    const Tensor lhs = WeightGrad(c.spec, 2.0 * d1 + d2, x);
    const Tensor rhs = 2.0 * WeightGrad(c.spec, d1, x) + WeightGrad(c.spec, d2, x);
    EXPECT_LE(MaxAbsDiff(lhs, rhs), 1e-10 * rhs.MaxAbs());
  }
}

TEST(Nonlinear, Relu) {
  const auto r = LayerSpec::Relu();
  EXPECT_EQ(NonlinearForward(r, Tensor({2}, {-1, 2})), Tensor({2}, {0, 2}));
  EXPECT_EQ(NonlinearBackward(r, Tensor({2}, {-1, 2}), Tensor({2}, {5, 7})),
            Tensor({2}, {0, 7}));
}

TEST(Nonlinear, MaxPoolRoutesToArgmax) {
  const auto m = LayerSpec::MaxPool(2);
  const Tensor x({1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(NonlinearForward(m, x), Tensor({1, 1, 1}, {4}));
  EXPECT_EQ(NonlinearBackward(m, x, Tensor({1, 1, 1}, {1})), Tensor({1, 2, 2}, {0, 0, 0, 1}));
}

TEST(Nonlinear, MaxPoolTieGoesToFirstIndex) {
  const auto m = LayerSpec::MaxPool(2);
  const Tensor x({1, 2, 2}, {3, 3, 3, 3});
  EXPECT_EQ(NonlinearBackward(m, x, Tensor({1, 1, 1}, {2})), Tensor({1, 2, 2}, {2, 0, 0, 0}));
}

TEST(Nonlinear, MaxPoolFiniteDifferences) {
  Rng rng(15);
  const auto m = LayerSpec::MaxPool(2);
  const double h = 1e-6;
  for (int t = 0; t < 20; ++t) {
    Tensor x = rng.NormalTensor({2, 4, 6}, 0.0, 1.0);
    const Tensor g = rng.NormalTensor(m.OutputShape(x.shape()), 0.0, 1.0);
    const Tensor dx = NonlinearBackward(m, x, g);
    Tensor fd(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i];
      x[i] = keep + h;
      const double up = Dot(g, NonlinearForward(m, x));
      x[i] = keep - h;
      const double down = Dot(g, NonlinearForward(m, x));
      x[i] = keep;
      fd[i] = (up - down) / (2 * h);
    }
    EXPECT_LT(RelError(dx, fd), 1e-5);
  }
}

TEST(Nonlinear, FlattenRoundTrip) {
  const auto f = LayerSpec::Flatten();
  Rng rng(16);
  const Tensor x = rng.NormalTensor({2, 3, 4}, 0.0, 1.0);
  const Tensor y = NonlinearForward(f, x);
  EXPECT_EQ(y.shape(), (Shape{24}));
  EXPECT_EQ(y.values(), x.values());
  EXPECT_EQ(NonlinearBackward(f, x, y), x);
}

TEST(Nonlinear, RejectsBilinearKinds) {
  EXPECT_THROW(NonlinearForward(LayerSpec::Dense(2, 2), Tensor({2})), InvalidArgument);
  EXPECT_THROW(LinearForward(LayerSpec::Relu(), Tensor({1}), Tensor({2})), InvalidArgument);
}

TEST(LayerSpec, OnlyDenseAndConvAreBilinear) {
  EXPECT_TRUE(LayerSpec::Dense(1, 1).bilinear());
  EXPECT_TRUE(LayerSpec::Conv2d(1, 1, 1).bilinear());
  EXPECT_FALSE(LayerSpec::Relu().bilinear());
  EXPECT_FALSE(LayerSpec::MaxPool(2).bilinear());
  EXPECT_FALSE(LayerSpec::Flatten().bilinear());
}

TEST(LayerSpec, KindNamesRoundTrip) {
  for (auto k : {LayerKind::kDense, LayerKind::kConv2d, LayerKind::kRelu, LayerKind::kMaxPool,
                 LayerKind::kFlatten}) {
    EXPECT_EQ(ParseLayerKind(LayerKindName(k)), k);
  }
  EXPECT_THROW(ParseLayerKind("batchnorm"), InvalidArgument);
}

TEST(Bias, AddAndGradient) {
  const auto c = LayerSpec::Conv2d(1, 2, 1);
  const Tensor y({2, 1, 2}, {1, 2, 3, 4});
  EXPECT_EQ(AddBias(c, y, Tensor({2}, {10, 20})), Tensor({2, 1, 2}, {11, 12, 23, 24}));
  EXPECT_EQ(BiasGrad(c, y), Tensor({2}, {3, 7}));
  const auto d = LayerSpec::Dense(2, 2);
  EXPECT_EQ(BiasGrad(d, Tensor({2}, {1, 2})), Tensor({2}, {1, 2}));
}

}  // namespace
}  // namespace vbmask
