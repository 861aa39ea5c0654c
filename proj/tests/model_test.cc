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

#include "vbmask/model.h"

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "vbmask/dataset.h"
#include "vbmask/errors.h"
#include "vbmask/rng.h"

namespace vbmask {
namespace {

Model SmallCnn(std::uint64_t seed) {
  return Model::Initialize({1, 6, 6},
                           {LayerSpec::Conv2d(1, 2, 3, 1, 1), LayerSpec::Relu(),
                            LayerSpec::MaxPool(2), LayerSpec::Flatten(),
                            LayerSpec::Dense(18, 3)},
                           seed);
}

TEST(Loss, SoftmaxCrossEntropyHandValues) {
  // Uniform logits: loss = ln(3), grad = softmax - onehot.
  const auto r = SoftmaxCrossEntropy(Tensor({3}, {0, 0, 0}), 1);
  EXPECT_NEAR(r.loss, std::log(3.0), 1e-15);
  EXPECT_NEAR(r.grad[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(r.grad[1], -2.0 / 3, 1e-15);
  EXPECT_THROW(SoftmaxCrossEntropy(Tensor({3}), 3), InvalidArgument);
}

TEST(Loss, StableForLargeLogits) {
  const auto r = SoftmaxCrossEntropy(Tensor({2}, {1000, 0}), 1);
  EXPECT_NEAR(r.loss, 1000.0, 1e-9);
  EXPECT_TRUE(r.grad.AllFinite());
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  Tensor z = rng.NormalTensor({5}, 0.0, 2.0);
  const auto r = SoftmaxCrossEntropy(z, 2);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double keep = z[i];
    z[i] = keep + 1e-6;
    const double up = SoftmaxCrossEntropy(z, 2).loss;
    z[i] = keep - 1e-6;
    const double down = SoftmaxCrossEntropy(z, 2).loss;
    z[i] = keep;
    EXPECT_NEAR(r.grad[i], (up - down) / 2e-6, 1e-7);
  }
}

TEST(Model, ShapesComposeAtRuntime) {
  const Model m = SmallCnn(3);
  Rng rng(4);
  const auto trace = ForwardPlain(m, rng.NormalTensor({1, 6, 6}, 0.0, 1.0));
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    EXPECT_EQ(trace.inputs[l].shape(), m.shape_at(l));
  }
  EXPECT_EQ(trace.logits.shape(), m.output_shape());
  EXPECT_THROW(Model({4}, {LayerSpec::Dense(3, 2)}), InvalidArgument);
}

// Full backprop against central differences of the loss in every weight.
TEST(Model, BackwardMatchesFiniteDifferences) {
  Model m = SmallCnn(5);
  Rng rng(6);
  for (auto& layer : m.layers()) {
    if (layer.spec.bilinear()) layer.bias = rng.NormalTensor(layer.bias.shape(), 0.0, 0.1);
  }
  const Tensor x = rng.NormalTensor({1, 6, 6}, 0.0, 1.0);
  const int label = 1;
  auto loss = [&] { return SoftmaxCrossEntropy(ForwardPlain(m, x).logits, label).loss; };
  const auto trace = ForwardPlain(m, x);
  Gradients g = Gradients::ZerosLike(m);
  BackwardPlain(m, trace, SoftmaxCrossEntropy(trace.logits, label).grad, g);
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    if (!m.layers()[l].spec.bilinear()) continue;
    for (Tensor* param : {&m.layers()[l].weight, &m.layers()[l].bias}) {
      const Tensor& analytic = param == &m.layers()[l].weight ? g.weight[l] : g.bias[l];
      Tensor fd(param->shape());
      for (std::size_t i = 0; i < param->size(); ++i) {
        const double keep = (*param)[i];
        (*param)[i] = keep + 1e-6;
        const double up = loss();
        (*param)[i] = keep - 1e-6;
        const double down = loss();
        (*param)[i] = keep;
        fd[i] = (up - down) / 2e-6;
      }
      EXPECT_LT(RelError(analytic, fd), 1e-5) << "layer " << l;
    }
  }
}

TEST(Schedule, EpochIsAPermutation) {
  BatchSchedule s(10, 2, 7);
  EXPECT_EQ(s.batches_per_epoch(), 5u);
  std::set<std::size_t> seen;
  for (std::size_t step = 0; step < 5; ++step) {
    for (auto i : s.Batch(step)) seen.insert(i);
  }
  EXPECT_EQ(seen.size(), 10u);
  BatchSchedule t(10, 2, 7);
  EXPECT_EQ(s.Batch(7), t.Batch(7));
  EXPECT_THROW(BatchSchedule(1, 2, 0), InvalidArgument);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.batch_size = 3;
  c.virtual_batch = 2;
  EXPECT_THROW(c.Validate(), InvalidArgument);
  c.batch_size = 4;
  c.learning_rate = -1;
  EXPECT_THROW(c.Validate(), InvalidArgument);
}

Dataset Blobs(std::uint64_t seed) {
  BlobsSpec spec;
  spec.seed = seed;
  return MakeBlobs(spec);
}

TEST(TrainPlaintext, SeparableBlobsReachHighAccuracy) {
  const Dataset data = Blobs(1);
  const Model init = Model::Initialize({20}, {LayerSpec::Dense(20, 2)}, 1);
  TrainConfig cfg;
  cfg.steps = 200;
  const auto r = TrainPlaintext(init, cfg, data);
  EXPECT_GE(Accuracy(r.model, data), 0.99);
}

TEST(TrainPlaintext, ZeroLearningRateKeepsWeights) {
  const Dataset data = Blobs(2);
  const Model init = Model::Initialize({20}, {LayerSpec::Dense(20, 2)}, 2);
  TrainConfig cfg;
  cfg.steps = 10;
  cfg.learning_rate = 0.0;
  const auto r = TrainPlaintext(init, cfg, data);
  EXPECT_EQ(r.model.layers()[0].weight, init.layers()[0].weight);
}

TEST(TrainPlaintext, Deterministic) {
  const Dataset data = Blobs(3);
  const Model init = Model::Initialize(
      {20}, {LayerSpec::Dense(20, 8), LayerSpec::Relu(), LayerSpec::Dense(8, 2)}, 3);
  TrainConfig cfg;
  cfg.steps = 30;
  const auto a = TrainPlaintext(init, cfg, data);
  const auto b = TrainPlaintext(init, cfg, data);
  ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    EXPECT_EQ(a.trajectory[i].weights, b.trajectory[i].weights);
  }
}

TEST(TrainPlaintext, UpdateIsPlainSgd) {
  const Dataset data = Blobs(4);
  const Model init = Model::Initialize({20}, {LayerSpec::Dense(20, 2)}, 4);
  TrainConfig cfg;
  cfg.steps = 1;
  cfg.learning_rate = 0.5;
  const auto r = TrainPlaintext(init, cfg, data);
  BatchSchedule s(data.size(), cfg.batch_size, cfg.seed);
  Gradients g = Gradients::ZerosLike(init);
  for (auto i : s.Batch(0)) {
    const auto t = ForwardPlain(init, data.inputs[i]);
    BackwardPlain(init, t, SoftmaxCrossEntropy(t.logits, data.labels[i]).grad, g);
  }
  Tensor expect = init.layers()[0].weight;
  expect.Axpy(-0.5 / 8.0, g.weight[0]);
  EXPECT_LT(RelError(r.model.layers()[0].weight, expect), 1e-14);
}

TEST(TrainPlaintext, EpochMetricsCoverAllSteps) {
  const Dataset data = Blobs(5);  // 200 points, 25 batches per epoch
  const Model init = Model::Initialize({20}, {LayerSpec::Dense(20, 2)}, 5);
  TrainConfig cfg;
  cfg.steps = 60;
  const auto r = TrainPlaintext(init, cfg, data, &data);
  ASSERT_EQ(r.epochs.size(), 3u);
  EXPECT_EQ(r.epochs[2].epoch, 2u);
  EXPECT_GT(r.epochs[2].val_acc, 0.9);
  EXPECT_EQ(r.epochs[0].wall_ms, 0.0);
}

}  // namespace
}  // namespace vbmask
