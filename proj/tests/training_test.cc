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

#include "vbmask/training.h"

#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "vbmask/dataset.h"
#include "vbmask/errors.h"

namespace vbmask {
namespace {

Dataset Blobs(std::size_t dim, std::uint64_t seed) {
  BlobsSpec b;
  b.dim = dim;
  b.points = 96;
  b.seed = seed;
  return MakeBlobs(b);
}

Model Mlp(std::uint64_t seed) {
  return Model::Initialize(
      {20}, {LayerSpec::Dense(20, 16), LayerSpec::Relu(), LayerSpec::Dense(16, 2)}, seed);
}

TrainConfig Cfg(std::size_t steps) {
  TrainConfig c;
  c.steps = steps;
  c.batch_size = 8;
  c.learning_rate = 0.1;
  return c;
}

double WorstTrajectoryError(const TrainResult& a, const TrainResult& b) {
  double worst = 0.0;
  EXPECT_EQ(a.trajectory.size(), b.trajectory.size());
  for (std::size_t s = 0; s < a.trajectory.size(); ++s) {
    for (std::size_t l = 0; l < a.trajectory[s].weights.size(); ++l) {
      worst = std::max(worst, RelError(a.trajectory[s].weights[l], b.trajectory[s].weights[l]));
    }
  }
  return worst;
}

TEST(TrainProtocol, MatchesPlaintextMlp) {
  const Dataset data = Blobs(20, 1);
  const auto plain = TrainPlaintext(Mlp(1), Cfg(60), data);
  const auto masked = TrainProtocol(Mlp(1), Cfg(60), data, nullptr, ProtocolOptions{});
  EXPECT_LT(WorstTrajectoryError(masked.train, plain), 1e-6);
  EXPECT_EQ(masked.integrity_failures, 0u);
  EXPECT_EQ(OneEncodingViolations(masked.transcript), 0u);
}

TEST(TrainProtocol, MatchesPlaintextCnn) {
  Dataset data = ReshapeSamples(Blobs(16, 2), {1, 4, 4});
  const Model init = Model::Initialize(
      {1, 4, 4},
      {LayerSpec::Conv2d(1, 2, 3, 1, 1), LayerSpec::Relu(), LayerSpec::MaxPool(2),
       LayerSpec::Flatten(), LayerSpec::Dense(8, 2)},
      2);
  const auto plain = TrainPlaintext(init, Cfg(20), data);
  const auto masked = TrainProtocol(init, Cfg(20), data, nullptr, ProtocolOptions{});
  EXPECT_LT(WorstTrajectoryError(masked.train, plain), 1e-6);
}

TEST(TrainProtocol, IdentitySchemeWithoutNoiseIsPlaintext) {
  const Dataset data = Blobs(20, 3);
  ProtocolOptions o;
  o.session.identity_scheme = true;
  o.session.noise = {0.0, 0.0};
  o.session.E = 0;
  const auto plain = TrainPlaintext(Mlp(3), Cfg(20), data);
  const auto masked = TrainProtocol(Mlp(3), Cfg(20), data, nullptr, o);
  EXPECT_LT(WorstTrajectoryError(masked.train, plain), 1e-12);
}

TEST(TrainProtocol, DeterministicTranscript) {
  const Dataset data = Blobs(20, 4);
  const auto a = TrainProtocol(Mlp(4), Cfg(5), data, &data, ProtocolOptions{});
  const auto b = TrainProtocol(Mlp(4), Cfg(5), data, &data, ProtocolOptions{});
  EXPECT_EQ(a.transcript.ToJsonl(), b.transcript.ToJsonl());
  EXPECT_EQ(MetricsJsonl(a.train.epochs), MetricsJsonl(b.train.epochs));
}

TEST(TrainProtocol, RequiresMatchingVirtualBatch) {
  const Dataset data = Blobs(20, 5);
  TrainConfig c = Cfg(2);
  c.virtual_batch = 4;
  EXPECT_THROW(TrainProtocol(Mlp(5), c, data, nullptr, ProtocolOptions{}), InvalidArgument);
}

ProtocolOptions WithFaulty(IntegrityPolicy policy, double probability) {
  ProtocolOptions o;
  o.policy = policy;
  o.workers = HonestWorkers(o.session.RequiredWorkers());
  o.workers[1] = WorkerProfile::Faulty(1, 1e-2, probability);
  return o;
}

TEST(Policy, AbortStopsTraining) {
  const Dataset data = Blobs(20, 6);
  EXPECT_THROW(TrainProtocol(Mlp(6), Cfg(5), data, nullptr,
                             WithFaulty(IntegrityPolicy::kAbort, 1.0)),
               IntegrityAbort);
}

TEST(Policy, LogAndContinueCountsFailures) {
  const Dataset data = Blobs(20, 7);
  const auto r = TrainProtocol(Mlp(7), Cfg(5), data, nullptr,
                               WithFaulty(IntegrityPolicy::kLogAndContinue, 1.0));
  EXPECT_GT(r.integrity_failures, 0u);
  std::size_t per_epoch = 0;
  for (const auto& e : r.train.epochs) per_epoch += e.integrity_failures;
  EXPECT_EQ(per_epoch, r.integrity_failures);
}

TEST(Policy, RetryRecoversFromIntermittentFaults) {
  // K = 1: every gradient equation is covered by the check, so every fault
  // is caught and retried (for K >= 2 see VerifyGrad.MultiInputCoverage*).
  const Dataset data = Blobs(20, 8);
  ProtocolOptions o;
  o.policy = IntegrityPolicy::kRetryBatch;
  o.max_retries = 20;
  o.session.K = 1;
  o.workers = HonestWorkers(o.session.RequiredWorkers());
  o.workers[1] = WorkerProfile::Faulty(1, 1e-2, 0.01);  // ~40 jobs per step
  TrainConfig cfg = Cfg(10);
  cfg.virtual_batch = 1;
  const auto r = TrainProtocol(Mlp(8), cfg, data, nullptr, o);
  EXPECT_GT(r.integrity_failures, 0u);
  // Retried steps recompute on honest results, so the trajectory is exact.
  const auto plain = TrainPlaintext(Mlp(8), cfg, data);
  EXPECT_LT(WorstTrajectoryError(r.train, plain), 1e-6);
}

TEST(Policy, RetryGivesUpOnPersistentFaults) {
  const Dataset data = Blobs(20, 9);
  EXPECT_THROW(TrainProtocol(Mlp(9), Cfg(3), data, nullptr,
                             WithFaulty(IntegrityPolicy::kRetryBatch, 1.0)),
               IntegrityAbort);
}

TEST(Policy, Names) {
  for (auto p : {IntegrityPolicy::kAbort, IntegrityPolicy::kRetryBatch,
                 IntegrityPolicy::kLogAndContinue}) {
    EXPECT_EQ(ParseIntegrityPolicy(IntegrityPolicyName(p)), p);
  }
  EXPECT_THROW(ParseIntegrityPolicy("ignore"), InvalidArgument);
}

TEST(InferProtocol, MatchesPlaintextLogits) {
  const Dataset data = Blobs(20, 10);
  const Model m = Mlp(10);
  std::vector<Tensor> xs(data.inputs.begin(), data.inputs.begin() + 11);  // odd count pads
  const auto r = InferProtocol(m, xs, ProtocolOptions{});
  ASSERT_EQ(r.logits.size(), xs.size());
  std::vector<std::size_t> plain;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor ref = ForwardPlain(m, xs[i]).logits;
    EXPECT_LT(RelError(r.logits[i], ref), 1e-8);
    plain.push_back(Argmax(ref));
  }
  EXPECT_EQ(ArgmaxAgreement(r.predictions, plain), 1.0);
}

TEST(InferProtocol, F32HighNoiseKeepsTopOne) {
  BlobsSpec b;
  b.classes = 4;
  b.points = 400;
  b.dim = 20;
  b.separation = 2.0;
  b.seed = 31;
  const Dataset data = MakeBlobs(b);
  const Model init = Model::Initialize(
      {20}, {LayerSpec::Dense(20, 16), LayerSpec::Relu(), LayerSpec::Dense(16, 4)}, 31);
  TrainConfig cfg = Cfg(150);
  cfg.precision = Precision::kF32;
  const Model model = TrainPlaintext(init, cfg, data).model;
  ProtocolOptions o;
  o.session.precision = Precision::kF32;
  o.session.noise = {0.0, 4e8};
  o.session.E = 0;  // f32 rounding would trip the exact-arithmetic checks
  const auto r = InferProtocol(model, data.inputs, o);
  std::vector<std::size_t> plain;
  for (const auto& x : data.inputs) {
    plain.push_back(Argmax(ForwardPlain(model, x, Precision::kF32).logits));
  }
  EXPECT_GE(ArgmaxAgreement(r.predictions, plain), 0.98);
}

TEST(InferProtocol, SingleInputVirtualBatch) {
  const Dataset data = Blobs(20, 11);
  const Model m = Mlp(11);
  ProtocolOptions o;
  o.session.K = 1;
  const auto r = InferProtocol(m, {data.inputs[0]}, o);
  EXPECT_LT(RelError(r.logits[0], ForwardPlain(m, data.inputs[0]).logits), 1e-10);
}

TEST(InferProtocol, FaultyWorkerAborts) {
  const Dataset data = Blobs(20, 12);
  EXPECT_THROW(InferProtocol(Mlp(12), {data.inputs[0], data.inputs[1]},
                             WithFaulty(IntegrityPolicy::kAbort, 1.0)),
               IntegrityAbort);
}

TEST(Metrics, JsonlKeysInOrder) {
  EpochMetrics e;
  e.epoch = 3;
  e.loss = 0.5;
  e.train_acc = 0.75;
  e.val_acc = 1.0;
  e.integrity_failures = 2;
  const std::string s = MetricsJsonl({e});
  EXPECT_EQ(s,
            "{\"epoch\":3,\"loss\":0.5,\"train_acc\":0.75,\"val_acc\":1.0,"
            "\"integrity_failures\":2,\"wall_ms\":0.0}\n");
}

TEST(Metrics, AgreementRate) {
  EXPECT_EQ(ArgmaxAgreement({1, 2, 3, 4}, {1, 2, 0, 4}), 0.75);
  EXPECT_THROW(ArgmaxAgreement({1}, {}), InvalidArgument);
}

}  // namespace
}  // namespace vbmask
