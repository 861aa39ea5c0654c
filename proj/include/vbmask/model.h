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

// Sequential models and the plaintext SGD engine. The plaintext engine is
// the reference every masked run is compared against.

#ifndef VBMASK_MODEL_H_
#define VBMASK_MODEL_H_

#include <cstdint>
#include <vector>

#include "vbmask/dataset.h"
#include "vbmask/layers.h"
#include "vbmask/tensor.h"

namespace vbmask {

struct Layer {
  LayerSpec spec;
  Tensor weight;  // empty for non-bilinear layers
  Tensor bias;
};

class Model {
 public:
  Model() = default;
  // Checks the shape algebra; parameters start at zero.
  Model(Shape input_shape, std::vector<LayerSpec> specs);

  // He-normal weights, zero biases, drawn from `seed`.
  static Model Initialize(Shape input_shape, std::vector<LayerSpec> specs,
                          std::uint64_t seed);

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return shapes_.back(); }
  // Input shape of layer l (shape_at(layers().size()) is the output).
  const Shape& shape_at(std::size_t l) const { return shapes_[l]; }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  // Weights of every bilinear layer, in layer order.
  std::vector<Tensor> WeightSnapshot() const;

 private:
  Shape input_shape_;
  std::vector<Shape> shapes_;
  std::vector<Layer> layers_;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // dLoss/dlogits
};

// Softmax cross-entropy with log-sum-exp stabilisation.
LossResult SoftmaxCrossEntropy(const Tensor& logits, int label);
std::size_t Argmax(const Tensor& t);

// Layer inputs recorded during a forward pass; inputs[l] feeds layer l.
struct ForwardTrace {
  std::vector<Tensor> inputs;
  Tensor logits;
};

ForwardTrace ForwardPlain(const Model& model, const Tensor& x,
                          Precision p = Precision::kF64);

// Summed gradients over a set of samples.
struct Gradients {
  std::vector<Tensor> weight;  // per layer; empty for non-bilinear layers
  std::vector<Tensor> bias;

  static Gradients ZerosLike(const Model& model);
};

// Accumulates one sample's parameter gradients into `acc`.
void BackwardPlain(const Model& model, const ForwardTrace& trace,
                   const Tensor& dlogits, Gradients& acc,
                   Precision p = Precision::kF64);

// W <- W - (lr / batch_size) * summed gradient, for every layer.
void ApplySgd(Model& model, const Gradients& grads, double learning_rate,
              std::size_t batch_size, Precision p = Precision::kF64);

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 8;
  std::size_t steps = 200;
  std::size_t virtual_batch = 2;  // K
  Precision precision = Precision::kF64;
  std::uint64_t seed = 1;
  std::size_t log_every = 1;  // weight snapshot period, in steps

  void Validate() const;
};

// Which samples make up each SGD step: one seeded shuffle per epoch, then
// consecutive batch_size slices (a ragged tail is dropped).
class BatchSchedule {
 public:
  BatchSchedule(std::size_t dataset_size, std::size_t batch_size,
                std::uint64_t seed);

  std::size_t batches_per_epoch() const { return batches_per_epoch_; }
  std::size_t EpochOf(std::size_t step) const {
    return step / batches_per_epoch_;
  }
  std::vector<std::size_t> Batch(std::size_t step);

 private:
  std::size_t dataset_size_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t batches_per_epoch_;
  std::size_t cached_epoch_ = static_cast<std::size_t>(-1);
  std::vector<std::size_t> order_;
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;  // mean over the batch, before the update
  std::vector<Tensor> weights;  // after the update
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::size_t integrity_failures = 0;
  double wall_ms = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<StepRecord> trajectory;
  std::vector<EpochMetrics> epochs;
};

double Accuracy(const Model& model, const Dataset& data,
                Precision p = Precision::kF64);

// Reference SGD: W <- W - lr * (1/B) * sum_i <delta_i, x_i> per batch.
TrainResult TrainPlaintext(Model model, const TrainConfig& cfg,
                           const Dataset& train, const Dataset* val = nullptr);

}  // namespace vbmask

#endif  // VBMASK_MODEL_H_
