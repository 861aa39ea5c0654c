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

#include <chrono>
#include <cmath>

#include "json.hpp"
#include "vbmask/errors.h"
#include "vbmask/io.h"

namespace vbmask {
namespace {

// Thrown inside a step to restart it under the retry-batch policy.
struct RetryStep {};

class VerdictGate {
 public:
  VerdictGate(const ProtocolOptions& opts, std::size_t& failures)
      : opts_(opts), failures_(failures) {}

  void Check(const IntegrityVerdict& v, const char* what, std::size_t layer) {
    if (v.passed) return;
    ++failures_;
    switch (opts_.policy) {
      case IntegrityPolicy::kAbort:
        throw IntegrityAbort(std::string(what) + " integrity check failed at layer " +
                             std::to_string(layer) + ": residual " +
                             FormatDouble(v.max_residual) + " >= tau " +
                             FormatDouble(v.tau));
      case IntegrityPolicy::kRetryBatch:
        throw RetryStep{};
      case IntegrityPolicy::kLogAndContinue:
        return;
    }
  }

 private:
  const ProtocolOptions& opts_;
  std::size_t& failures_;
};

std::vector<WorkerProfile> WorkersFor(const ProtocolOptions& opts) {
  if (!opts.workers.empty()) return opts.workers;
  return HonestWorkers(opts.session.RequiredWorkers());
}

void LoadModel(Session& session, const Model& model) {
  std::vector<LayerSpec> specs;
  std::vector<Tensor> weights;
  for (const auto& layer : model.layers()) {
    specs.push_back(layer.spec);
    weights.push_back(layer.weight);
  }
  session.LoadWeights(specs, weights);
}

// Masked forward of K inputs; returns logits and fills per-layer inputs.
std::vector<Tensor> MaskedForward(Session& session, const Model& model,
                                  std::vector<Tensor> h, Precision p,
                                  VerdictGate& gate,
                                  std::vector<std::vector<Tensor>>* inputs) {
  for (auto& x : h) x = RoundTo(p, std::move(x));
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    if (inputs) (*inputs)[l] = h;
    if (layer.spec.bilinear()) {
      auto out = session.Forward(l, h);
      gate.Check(out.verdict, "forward", l);
      for (std::size_t k = 0; k < h.size(); ++k) {
        h[k] = RoundTo(p, AddBias(layer.spec, std::move(out.outputs[k]), layer.bias));
      }
    } else {
      for (auto& x : h) x = NonlinearForward(layer.spec, x);
    }
  }
  return h;
}

}  // namespace

std::string IntegrityPolicyName(IntegrityPolicy p) {
  switch (p) {
    case IntegrityPolicy::kAbort:
      return "abort";
    case IntegrityPolicy::kRetryBatch:
      return "retry-batch";
    case IntegrityPolicy::kLogAndContinue:
      return "log-and-continue";
  }
  return "?";
}

IntegrityPolicy ParseIntegrityPolicy(const std::string& name) {
  if (name == "abort") return IntegrityPolicy::kAbort;
  if (name == "retry-batch") return IntegrityPolicy::kRetryBatch;
  if (name == "log-and-continue") return IntegrityPolicy::kLogAndContinue;
  throw InvalidArgument("unknown integrity policy '" + name +
                        "' (expected abort, retry-batch or log-and-continue)");
}

ProtocolTrainResult TrainProtocol(Model model, const TrainConfig& cfg,
                                  const Dataset& train, const Dataset* val,
                                  const ProtocolOptions& opts) {
  cfg.Validate();
  train.Validate();
  if (cfg.virtual_batch != static_cast<std::size_t>(opts.session.K)) {
    throw InvalidArgument("train.virtual_batch must equal the session's K");
  }
  SessionConfig sc = opts.session;
  sc.precision = cfg.precision;
  Session session(sc, WorkersFor(opts));
  LoadModel(session, model);

  const Precision p = cfg.precision;
  const std::size_t K = cfg.virtual_batch;
  const std::size_t L = model.layers().size();
  BatchSchedule schedule(train.size(), cfg.batch_size, cfg.seed);
  ProtocolTrainResult result;
  TrainResult& tr = result.train;
  VerdictGate gate(opts, result.integrity_failures);

  EpochMetrics current;
  std::size_t seen = 0, correct = 0, epoch_failures_base = 0;
  double loss_sum = 0.0;
  auto epoch_start = std::chrono::steady_clock::now();

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto batch = schedule.Batch(step);
    Gradients grads;
    double batch_loss = 0.0;
    std::size_t batch_correct = 0;
    for (int attempt = 0;; ++attempt) {
      grads = Gradients::ZerosLike(model);
      batch_loss = 0.0;
      batch_correct = 0;
      try {
        for (std::size_t start = 0; start < batch.size(); start += K) {
          session.BeginVirtualBatch();
          std::vector<Tensor> xs;
          std::vector<int> labels;
          for (std::size_t k = 0; k < K; ++k) {
            xs.push_back(train.inputs[batch[start + k]]);
            labels.push_back(train.labels[batch[start + k]]);
          }
          std::vector<std::vector<Tensor>> inputs(L);
          auto logits = MaskedForward(session, model, std::move(xs), p, gate, &inputs);

          std::vector<Tensor> deltas;
          for (std::size_t k = 0; k < K; ++k) {
            auto loss = SoftmaxCrossEntropy(logits[k], labels[k]);
            if (!std::isfinite(loss.loss)) {
              throw NonFiniteLoss("non-finite loss at step " + std::to_string(step) +
                                  ", sample " + std::to_string(batch[start + k]));
            }
            batch_loss += loss.loss;
            if (Argmax(logits[k]) == static_cast<std::size_t>(labels[k])) {
              ++batch_correct;
            }
            deltas.push_back(RoundTo(p, std::move(loss.grad)));
          }

          for (std::size_t l = L; l-- > 0;) {
            const auto& layer = model.layers()[l];
            if (layer.spec.bilinear()) {
              auto g = session.WeightGrad(l, deltas);
              gate.Check(g.verdict, "gradient", l);
              grads.weight[l] += g.sum;
              for (const auto& d : deltas) grads.bias[l] += BiasGrad(layer.spec, d);
              if (l > 0) {
                auto ig = session.InputGrad(l, deltas);
                gate.Check(ig.verdict, "input-gradient", l);
                for (std::size_t k = 0; k < K; ++k) {
                  deltas[k] = RoundTo(p, std::move(ig.deltas[k]));
                }
              }
            } else {
              for (std::size_t k = 0; k < K; ++k) {
                deltas[k] = NonlinearBackward(layer.spec, inputs[l][k], deltas[k]);
              }
            }
          }
        }
        break;
      } catch (const RetryStep&) {
        if (attempt + 1 > opts.max_retries) {
          throw IntegrityAbort("integrity checks still failing at step " +
                               std::to_string(step) + " after " +
                               std::to_string(opts.max_retries) + " retries");
        }
      }
    }
    seen += batch.size();
    correct += batch_correct;
    loss_sum += batch_loss;
    ApplySgd(model, grads, cfg.learning_rate, cfg.batch_size, p);
    session.BroadcastUpdate(grads.weight, cfg.learning_rate, cfg.batch_size);

    if ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.steps) {
      tr.trajectory.push_back({step, batch_loss / static_cast<double>(batch.size()),
                               model.WeightSnapshot()});
    }
    const bool epoch_done =
        (step + 1) % schedule.batches_per_epoch() == 0 || step + 1 == cfg.steps;
    if (epoch_done) {
      current.epoch = schedule.EpochOf(step);
      current.loss = loss_sum / static_cast<double>(seen);
      current.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
      current.val_acc = val ? Accuracy(model, *val, p) : 0.0;
      current.integrity_failures = result.integrity_failures - epoch_failures_base;
      if (opts.record_timing) {
        const auto now = std::chrono::steady_clock::now();
        current.wall_ms =
            std::chrono::duration<double, std::milli>(now - epoch_start).count();
        epoch_start = now;
      }
      tr.epochs.push_back(current);
      current = EpochMetrics{};
      seen = correct = 0;
      loss_sum = 0.0;
      epoch_failures_base = result.integrity_failures;
    }
  }
  tr.model = std::move(model);
  result.transcript = session.transcript();
  return result;
}

InferResult InferProtocol(const Model& model, const std::vector<Tensor>& inputs,
                          const ProtocolOptions& opts) {
  Session session(opts.session, WorkersFor(opts));
  LoadModel(session, model);
  InferResult result;
  VerdictGate gate(opts, result.integrity_failures);
  const auto K = static_cast<std::size_t>(opts.session.K);
  for (std::size_t start = 0; start < inputs.size(); start += K) {
    std::vector<Tensor> xs;
    for (std::size_t k = 0; k < K; ++k) {
      xs.push_back(start + k < inputs.size() ? inputs[start + k]
                                             : Tensor(model.input_shape()));
    }
    for (int attempt = 0;; ++attempt) {
      try {
        session.BeginVirtualBatch();
        auto logits = MaskedForward(session, model, xs, opts.session.precision,
                                    gate, nullptr);
        for (std::size_t k = 0; k < K && start + k < inputs.size(); ++k) {
          result.predictions.push_back(Argmax(logits[k]));
          result.logits.push_back(std::move(logits[k]));
        }
        break;
      } catch (const RetryStep&) {
        if (attempt + 1 > opts.max_retries) {
          throw IntegrityAbort("integrity checks still failing for inputs " +
                               std::to_string(start) + ".." +
                               std::to_string(start + K - 1));
        }
      }
    }
  }
  result.transcript = session.transcript();
  return result;
}

double ArgmaxAgreement(const std::vector<std::size_t>& a,
                       const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) throw InvalidArgument("prediction lists differ in length");
  if (a.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

std::string MetricsJsonl(const std::vector<EpochMetrics>& epochs) {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["train_acc"] = e.train_acc;
    j["val_acc"] = e.val_acc;
    j["integrity_failures"] = e.integrity_failures;
    j["wall_ms"] = e.wall_ms;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace vbmask
