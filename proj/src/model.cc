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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vbmask/errors.h"
#include "vbmask/rng.h"

namespace vbmask {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5348;  // "SH"

std::size_t FanIn(const LayerSpec& s) {
  return s.kind == LayerKind::kDense ? s.in_features
                                     : s.in_channels * s.kernel * s.kernel;
}

}  // namespace

Model::Model(Shape input_shape, std::vector<LayerSpec> specs)
    : input_shape_(std::move(input_shape)) {
  if (specs.empty()) throw InvalidArgument("model needs at least one layer");
  shapes_.push_back(input_shape_);
  for (auto& spec : specs) {
    Shape out = spec.OutputShape(shapes_.back());
    Layer layer;
    layer.spec = spec;
    if (spec.bilinear()) {
      layer.weight = Tensor(spec.WeightShape());
      layer.bias = Tensor(spec.BiasShape());
    }
    layers_.push_back(std::move(layer));
    shapes_.push_back(std::move(out));
  }
  if (shapes_.back().size() != 1) {
    throw InvalidArgument("model output must be a logits vector, got " +
                          ShapeToString(shapes_.back()));
  }
}

Model Model::Initialize(Shape input_shape, std::vector<LayerSpec> specs,
                        std::uint64_t seed) {
  Model model(std::move(input_shape), std::move(specs));
  Rng rng(seed);
  for (auto& layer : model.layers_) {
    if (!layer.spec.bilinear()) continue;
    const double stddev = std::sqrt(2.0 / static_cast<double>(FanIn(layer.spec)));
    layer.weight = rng.NormalTensor(layer.spec.WeightShape(), 0.0, stddev);
  }
  return model;
}

std::vector<Tensor> Model::WeightSnapshot() const {
  std::vector<Tensor> out;
  for (const auto& layer : layers_) {
    if (layer.spec.bilinear()) out.push_back(layer.weight);
  }
  return out;
}

LossResult SoftmaxCrossEntropy(const Tensor& logits, int label) {
  if (logits.rank() != 1 || label < 0 ||
      static_cast<std::size_t>(label) >= logits.size()) {
    throw InvalidArgument("SoftmaxCrossEntropy: label " + std::to_string(label) +
                          " invalid for logits " + ShapeToString(logits.shape()));
  }
  const double m = *std::max_element(logits.values().begin(),
                                     logits.values().end());
  double sum = 0.0;
  for (double v : logits.values()) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  LossResult r;
  r.loss = lse - logits[static_cast<std::size_t>(label)];
  r.grad = Tensor(logits.shape());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.grad[i] = std::exp(logits[i] - lse);
  }
  r.grad[static_cast<std::size_t>(label)] -= 1.0;
  return r;
}

std::size_t Argmax(const Tensor& t) {
  return static_cast<std::size_t>(
      std::max_element(t.values().begin(), t.values().end()) -
      t.values().begin());
}

ForwardTrace ForwardPlain(const Model& model, const Tensor& x, Precision p) {
  RequireShape(x, model.input_shape(), "ForwardPlain input");
  ForwardTrace trace;
  Tensor h = RoundTo(p, x);
  for (const auto& layer : model.layers()) {
    trace.inputs.push_back(h);
    if (layer.spec.bilinear()) {
      h = RoundTo(p, AddBias(layer.spec, LinearForward(layer.spec, layer.weight,
                                                       h, p),
                             layer.bias));
    } else {
      h = NonlinearForward(layer.spec, h);
    }
  }
  trace.logits = std::move(h);
  return trace;
}

Gradients Gradients::ZerosLike(const Model& model) {
  Gradients g;
  for (const auto& layer : model.layers()) {
    if (layer.spec.bilinear()) {
      g.weight.emplace_back(layer.spec.WeightShape());
      g.bias.emplace_back(layer.spec.BiasShape());
    } else {
      g.weight.emplace_back();
      g.bias.emplace_back();
    }
  }
  return g;
}

void BackwardPlain(const Model& model, const ForwardTrace& trace,
                   const Tensor& dlogits, Gradients& acc, Precision p) {
  Tensor delta = RoundTo(p, dlogits);
  for (std::size_t l = model.layers().size(); l-- > 0;) {
    const auto& layer = model.layers()[l];
    const Tensor& x = trace.inputs[l];
    if (layer.spec.bilinear()) {
      acc.weight[l] += WeightGrad(layer.spec, delta, x, p);
      acc.bias[l] += BiasGrad(layer.spec, delta);
      if (l > 0) delta = InputGrad(layer.spec, layer.weight, delta, x.shape(), p);
    } else {
      delta = NonlinearBackward(layer.spec, x, delta);
    }
  }
}

void ApplySgd(Model& model, const Gradients& grads, double learning_rate,
              std::size_t batch_size, Precision p) {
  const double scale = -learning_rate / static_cast<double>(batch_size);
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    auto& layer = model.layers()[l];
    if (!layer.spec.bilinear()) continue;
    layer.weight = RoundTo(p, std::move(layer.weight.Axpy(scale, grads.weight[l])));
    layer.bias = RoundTo(p, std::move(layer.bias.Axpy(scale, grads.bias[l])));
  }
}

void TrainConfig::Validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be finite and non-negative");
  }
  if (virtual_batch == 0) throw InvalidArgument("virtual batch K must be >= 1");
  if (batch_size < virtual_batch || batch_size % virtual_batch != 0) {
    throw InvalidArgument("batch_size must be a positive multiple of K");
  }
  if (log_every == 0) throw InvalidArgument("log_every must be >= 1");
}

BatchSchedule::BatchSchedule(std::size_t dataset_size, std::size_t batch_size,
                             std::uint64_t seed)
    : dataset_size_(dataset_size), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0 || dataset_size < batch_size) {
    throw InvalidArgument("dataset smaller than one batch");
  }
  batches_per_epoch_ = dataset_size / batch_size;
}

std::vector<std::size_t> BatchSchedule::Batch(std::size_t step) {
  const std::size_t epoch = EpochOf(step);
  if (epoch != cached_epoch_) {
    order_.resize(dataset_size_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(DeriveSeed(seed_, kShuffleStream, epoch));
    std::shuffle(order_.begin(), order_.end(), rng.engine());
    cached_epoch_ = epoch;
  }
  const std::size_t start = (step % batches_per_epoch_) * batch_size_;
  return {order_.begin() + static_cast<long>(start),
          order_.begin() + static_cast<long>(start + batch_size_)};
}

double Accuracy(const Model& model, const Dataset& data, Precision p) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto trace = ForwardPlain(model, data.inputs[i], p);
    if (Argmax(trace.logits) == static_cast<std::size_t>(data.labels[i])) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult TrainPlaintext(Model model, const TrainConfig& cfg,
                           const Dataset& train, const Dataset* val) {
  cfg.Validate();
  train.Validate();
  BatchSchedule schedule(train.size(), cfg.batch_size, cfg.seed);
  TrainResult result;
  EpochMetrics current;
  std::size_t seen = 0, correct = 0;
  double loss_sum = 0.0;

  auto close_epoch = [&](std::size_t epoch) {
    current.epoch = epoch;
    current.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    current.train_acc =
        seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    current.val_acc = val ? Accuracy(model, *val, cfg.precision) : 0.0;
    result.epochs.push_back(current);
    current = EpochMetrics{};
    seen = correct = 0;
    loss_sum = 0.0;
  };

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    auto batch = schedule.Batch(step);
    Gradients grads = Gradients::ZerosLike(model);
    double batch_loss = 0.0;
    for (std::size_t idx : batch) {
      auto trace = ForwardPlain(model, train.inputs[idx], cfg.precision);
      auto loss = SoftmaxCrossEntropy(trace.logits, train.labels[idx]);
      if (!std::isfinite(loss.loss)) {
        throw NonFiniteLoss("non-finite loss at step " + std::to_string(step) +
                            ", sample " + std::to_string(idx));
      }
      batch_loss += loss.loss;
      if (Argmax(trace.logits) == static_cast<std::size_t>(train.labels[idx])) {
        ++correct;
      }
      BackwardPlain(model, trace, loss.grad, grads, cfg.precision);
    }
    seen += batch.size();
    loss_sum += batch_loss;
    ApplySgd(model, grads, cfg.learning_rate, cfg.batch_size, cfg.precision);
    if ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.steps) {
      result.trajectory.push_back(
          {step, batch_loss / static_cast<double>(batch.size()),
           model.WeightSnapshot()});
    }
    const bool epoch_done =
        (step + 1) % schedule.batches_per_epoch() == 0 || step + 1 == cfg.steps;
    if (epoch_done) close_epoch(schedule.EpochOf(step));
  }
  result.model = std::move(model);
  return result;
}

}  // namespace vbmask
