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

// In-process simulation of a trusted coordinator driving untrusted workers.
//
// The coordinator owns every secret: raw inputs, coding schemes and noise.
// Workers hold weight replicas and see one masked tensor per job. Every
// message crosses a Transcript so tests can audit what each worker saw.
//
// Encoding index e of every offload goes to worker assignment()[e]. Indices
// 0 .. P-1 are the base encodings, P .. P+E-1 the integrity extensions and,
// when K >= 2 and integrity is on, index P+E carries the extra gradient
// equation.

#ifndef VBMASK_PROTOCOL_H_
#define VBMASK_PROTOCOL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vbmask/coding.h"
#include "vbmask/layers.h"
#include "vbmask/tensor.h"

namespace vbmask {

enum class OpKind { kForwardLinear, kGradEquation, kInputGradLinear };
std::string OpKindName(OpKind kind);

struct LinearJob {
  std::uint64_t job_id = 0;
  std::size_t layer = 0;
  OpKind op = OpKind::kForwardLinear;
  // Masked operand. Empty for gradient jobs that reuse the worker's cached
  // forward encoding (see ref_job_id).
  Tensor payload;
  std::optional<std::uint64_t> ref_job_id;
  // Gradient jobs: the combined gradient, or in paper-literal mode the raw
  // per-input gradients with this worker's combination row.
  Tensor gradient;
  std::vector<Tensor> raw_deltas;
  std::vector<double> beta_row;
  Shape input_shape;  // input-gradient jobs
  std::uint64_t weights_version = 0;
};

struct LinearResult {
  std::uint64_t job_id = 0;
  int worker_id = 0;
  Tensor output;
};

enum class Behavior { kHonest, kFaulty, kColluding, kUnresponsive };
std::string BehaviorName(Behavior b);
Behavior ParseBehavior(const std::string& name);

struct WorkerProfile {
  int worker_id = 0;
  Behavior behavior = Behavior::kHonest;
  double perturbation_scale = 0.0;  // faulty only
  double fault_probability = 0.0;   // faulty only
  int group_id = 0;                 // colluding only

  void Validate() const;
  static WorkerProfile Honest(int id);
  static WorkerProfile Faulty(int id, double scale, double probability = 1.0);
  static WorkerProfile Colluding(int id, int group);
};

std::vector<WorkerProfile> HonestWorkers(int count);

struct Message {
  std::uint64_t seq = 0;
  std::string from;
  std::string to;
  std::string kind;
  std::uint64_t job_id = 0;
  std::uint64_t tensor_digest = 0;
  Shape shape;

  // Audit bookkeeping; not part of the exported record.
  int worker = -1;  // worker on the receiving side, -1 for the coordinator
  std::int64_t virtual_batch = -1;
  std::int64_t layer = -1;
  std::string stream;  // "activation" or "delta" for encoded payloads
  bool carries_encoding = false;
};

class Transcript {
 public:
  void Append(Message m);
  const std::vector<Message>& messages() const { return messages_; }
  std::size_t size() const { return messages_.size(); }

  // One JSON object per line: seq, from, to, kind, job_id, tensor_digest
  // (16 hex digits), shape.
  std::string ToJsonl() const;

 private:
  std::vector<Message> messages_;
};

// Number of (worker, virtual batch, layer, stream) slots that received more
// than one encoded tensor. Zero for a well-behaved run.
std::size_t OneEncodingViolations(const Transcript& t);

// Worker-bound messages whose digest matches a forbidden digest.
std::size_t SecrecyViolations(const Transcript& t,
                              const std::vector<std::uint64_t>& forbidden);

struct CollusionEntry {
  std::int64_t virtual_batch = 0;
  std::size_t layer = 0;
  std::string stream;
  int encoding_index = 0;
  Tensor payload;
};

enum class Knowledge { kNone, kCoefficientsKnown };
std::string KnowledgeName(Knowledge k);
Knowledge ParseKnowledge(const std::string& name);

// Everything a colluding group pooled for one offload.
struct CollusionLog {
  int group_id = 0;
  std::vector<std::pair<int, Tensor>> payloads;  // (encoding index, tensor)
  Knowledge knowledge = Knowledge::kCoefficientsKnown;
};

// A worker: weight replicas plus the encodings it must keep for backward.
class Worker {
 public:
  Worker(WorkerProfile profile, std::uint64_t session_seed);

  const WorkerProfile& profile() const { return profile_; }
  std::uint64_t version() const { return version_; }
  const Tensor& replica(std::size_t layer) const;

  void LoadWeights(const std::vector<LayerSpec>& specs,
                   const std::vector<Tensor>& weights, std::uint64_t version);
  // W <- W - (lr / batch_size) * dW for the given layer.
  void ApplyUpdate(std::size_t layer, const Tensor& dW, double learning_rate,
                   std::size_t batch_size, Precision p);
  void SetVersion(std::uint64_t version) { version_ = version; }

  // Returns nullopt when the worker does not answer.
  std::optional<LinearResult> Step(const LinearJob& job, Precision p);

  // Forgets cached encodings (end of a virtual batch).
  void ClearCache() { cache_.clear(); }

 private:
  WorkerProfile profile_;
  std::uint64_t session_seed_;
  std::vector<LayerSpec> specs_;
  std::vector<Tensor> replicas_;
  std::uint64_t version_ = 0;
  std::map<std::uint64_t, Tensor> cache_;  // job_id -> received encoding
};

// Honest worker arithmetic, shared by Worker::Step and tests.
Tensor HonestCompute(const LayerSpec& spec, const Tensor& weight,
                     const LinearJob& job, const Tensor& operand, Precision p);

struct SessionConfig {
  int K = 2;
  int M = 1;
  int E = 1;  // integrity extension columns; 0 disables integrity checks
  double c_min = 0.1;
  NoiseSpec noise;
  double tau = kDefaultTau;
  Precision precision = Precision::kF64;
  std::uint64_t seed = 1;
  bool permute_assignment = false;
  // Workers get raw per-input gradients plus their beta row.
  bool paper_literal = false;
  // Offload input-gradient backprop with fresh masks; otherwise computed in
  // the coordinator.
  bool offload_input_grad = true;
  // A = I, gamma = 1, A_ext = ones: no masking at all. For tests.
  bool identity_scheme = false;

  void Validate() const;
  int P() const { return K + M; }
  // Workers needed so every job lands on a distinct worker.
  int RequiredWorkers() const;
};

struct ForwardOutcome {
  std::vector<Tensor> outputs;  // K decoded bilinear outputs (no bias)
  IntegrityVerdict verdict;
};

struct GradOutcome {
  Tensor sum;  // decoded sum_i <delta_i, x_i>
  IntegrityVerdict verdict;
};

struct InputGradOutcome {
  std::vector<Tensor> deltas;  // K input gradients
  IntegrityVerdict verdict;
};

class Session {
 public:
  Session(SessionConfig cfg, std::vector<WorkerProfile> workers);

  const SessionConfig& config() const { return cfg_; }
  const Transcript& transcript() const { return transcript_; }
  const std::vector<Worker>& workers() const { return workers_; }
  const std::vector<int>& assignment() const { return assignment_; }
  std::uint64_t version() const { return version_; }
  const std::vector<Tensor>& weights() const { return weights_; }

  // Sends initial weights for every bilinear layer to every worker.
  void LoadWeights(const std::vector<LayerSpec>& specs,
                   const std::vector<Tensor>& weights);

  // Starts a virtual batch: clears caches and derives fresh sub-seeds.
  void BeginVirtualBatch();
  std::int64_t virtual_batch() const { return vb_; }

  // Masks K inputs with fresh noise and a fresh scheme, offloads <W, .>,
  // decodes and verifies. The encodings stay cached for WeightGrad.
  ForwardOutcome Forward(std::size_t layer, const std::vector<Tensor>& inputs);
  // Same with a caller-supplied batch and scheme.
  ForwardOutcome ForwardWith(std::size_t layer, const VirtualBatch& batch,
                             const CodingScheme& scheme);

  // Weight-gradient sum for `layer` from the K output gradients, reusing the
  // encodings cached by the last Forward on that layer.
  GradOutcome WeightGrad(std::size_t layer, const std::vector<Tensor>& deltas);

  // K input gradients for `layer`.
  InputGradOutcome InputGrad(std::size_t layer,
                             const std::vector<Tensor>& deltas);

  // Broadcasts the decoded gradient sums and the step size; every replica
  // applies W <- W - lr / batch_size * dW. Returns the new version.
  std::uint64_t BroadcastUpdate(const std::vector<Tensor>& dW_sums,
                                double learning_rate, std::size_t batch_size);

  // Coordinator-side view of the scheme used for the last offload of a
  // layer's activations. For audits and attack experiments only.
  const CodingScheme& LastScheme(std::size_t layer) const;
  const VirtualBatch& LastBatch(std::size_t layer) const;

  // Pooled payloads of a colluding group.
  const std::vector<CollusionEntry>& GroupLog(int group) const;
  CollusionLog GroupLogFor(int group, std::int64_t virtual_batch,
                           std::size_t layer,
                           const std::string& stream = "activation") const;

  // Digests of everything that must never reach a worker: raw offloaded
  // inputs and the coefficient matrices.
  const std::vector<std::uint64_t>& SecretDigests() const { return secrets_; }

 private:
  struct LayerCache {
    CodingScheme scheme;
    VirtualBatch batch;
    std::vector<std::uint64_t> job_ids;  // per encoding index
    bool valid = false;
  };

  CodingScheme NewScheme(std::size_t layer, int stream);
  VirtualBatch NewBatch(std::size_t layer, int stream,
                        std::vector<Tensor> inputs);
  std::vector<LinearResult> Dispatch(std::vector<LinearJob> jobs,
                                     const std::vector<int>& encoding_index,
                                     const std::string& stream);
  void RecordSecrets(const VirtualBatch& batch, const CodingScheme& scheme);
  std::uint64_t NextJobId() { return next_job_id_++; }
  Worker& WorkerFor(int encoding_index);
  void Send(Message m);

  SessionConfig cfg_;
  std::vector<Worker> workers_;
  std::vector<int> assignment_;
  std::vector<LayerSpec> specs_;
  std::vector<Tensor> weights_;  // coordinator copy
  std::uint64_t version_ = 0;
  std::int64_t vb_ = -1;
  std::uint64_t next_job_id_ = 1;
  std::uint64_t next_seq_ = 0;
  Transcript transcript_;
  std::map<std::size_t, LayerCache> cache_;
  std::map<int, std::vector<CollusionEntry>> group_logs_;
  std::vector<std::uint64_t> secrets_;
};

struct VirtualBatchRun {
  std::vector<Tensor> outputs;
  IntegrityVerdict verdict;
  Transcript transcript;
};

// One forward offload of a single bilinear layer with a fresh session.
// `scheme` defaults to one drawn from the session seed.
VirtualBatchRun RunVirtualBatch(const VirtualBatch& batch,
                                const LayerSpec& layer, const Tensor& weight,
                                const std::vector<WorkerProfile>& workers,
                                const SessionConfig& cfg,
                                const CodingScheme* scheme = nullptr);

}  // namespace vbmask

#endif  // VBMASK_PROTOCOL_H_
