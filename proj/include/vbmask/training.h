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

// Training and inference with every bilinear layer offloaded through a
// Session. Nonlinearities, biases and the loss stay in the coordinator.

#ifndef VBMASK_TRAINING_H_
#define VBMASK_TRAINING_H_

#include <string>
#include <vector>

#include "vbmask/dataset.h"
#include "vbmask/model.h"
#include "vbmask/protocol.h"

namespace vbmask {

enum class IntegrityPolicy { kAbort, kRetryBatch, kLogAndContinue };
std::string IntegrityPolicyName(IntegrityPolicy p);
IntegrityPolicy ParseIntegrityPolicy(const std::string& name);

struct ProtocolOptions {
  SessionConfig session;
  std::vector<WorkerProfile> workers;  // empty: the minimum honest set
  IntegrityPolicy policy = IntegrityPolicy::kAbort;
  int max_retries = 3;  // retry-batch only
  // Fill wall_ms in the epoch metrics. Off by default so metrics files are
  // reproducible byte for byte.
  bool record_timing = false;
};

struct ProtocolTrainResult {
  TrainResult train;
  Transcript transcript;
  std::size_t integrity_failures = 0;
};

// Masked SGD. Uses the same batch order as TrainPlaintext, so with exact
// arithmetic both produce the same trajectory. cfg.virtual_batch must equal
// opts.session.K and cfg.precision overrides opts.session.precision.
ProtocolTrainResult TrainProtocol(Model model, const TrainConfig& cfg,
                                  const Dataset& train, const Dataset* val,
                                  const ProtocolOptions& opts);

struct InferResult {
  std::vector<Tensor> logits;
  std::vector<std::size_t> predictions;
  Transcript transcript;
  std::size_t integrity_failures = 0;
};

// Masked forward passes over `inputs` in groups of K; a short last group is
// padded with zero inputs whose outputs are dropped.
InferResult InferProtocol(const Model& model, const std::vector<Tensor>& inputs,
                          const ProtocolOptions& opts);

double ArgmaxAgreement(const std::vector<std::size_t>& a,
                       const std::vector<std::size_t>& b);

// One JSON object per epoch: epoch, loss, train_acc, val_acc,
// integrity_failures, wall_ms.
std::string MetricsJsonl(const std::vector<EpochMetrics>& epochs);

}  // namespace vbmask

#endif  // VBMASK_TRAINING_H_
