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

#include "vbmask/protocol.h"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "vbmask/errors.h"

namespace vbmask {
namespace {

constexpr std::uint64_t kSchemeStream = 0x5343;  // "SC"
constexpr std::uint64_t kNoiseStream = 0x4e5a;   // "NZ"
constexpr std::uint64_t kFaultStream = 0x4654;   // "FT"
constexpr std::uint64_t kAssignStream = 0x4153;  // "AS"

constexpr int kActivationStream = 0;
constexpr int kDeltaStream = 1;

const char* StreamName(int stream) {
  return stream == kActivationStream ? "activation" : "delta";
}

std::string WorkerName(int w) { return "worker:" + std::to_string(w); }

std::uint64_t DigestAll(const std::vector<Tensor>& ts) {
  std::vector<std::uint8_t> bytes;
  for (const auto& t : ts) {
    auto b = t.Bytes();
    bytes.insert(bytes.end(), b.begin(), b.end());
  }
  return Fnv1a64(bytes);
}

std::uint64_t MatrixDigest(const Matrix& m) {
  std::vector<double> data;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  if (data.empty()) return 0;
  return Digest(Tensor({static_cast<std::size_t>(m.rows()),
                        static_cast<std::size_t>(m.cols())},
                       std::move(data)));
}

SchemeOptions OptionsFor(const SessionConfig& cfg, std::uint64_t seed) {
  SchemeOptions o;
  o.K = cfg.K;
  o.M = cfg.M;
  o.E = cfg.E;
  o.c_min = cfg.c_min;
  o.seed = seed;
  return o;
}

CodingScheme IdentityScheme(const SessionConfig& cfg, std::uint64_t seed) {
  const int P = cfg.P();
  return MakeScheme(cfg.K, cfg.M, Matrix::Identity(P, P), Vector::Ones(P),
                    Matrix::Ones(P, cfg.E), seed);
}

// Unit vector in the max norm with uniformly random entries.
Tensor RandomDirection(const Shape& shape, Rng& rng) {
  Tensor u(shape);
  for (auto& v : u.data()) v = rng.Uniform(-1.0, 1.0);
  const double m = u.MaxAbs();
  if (m > 0.0) u *= 1.0 / m;
  return u;
}

}  // namespace

std::string OpKindName(OpKind kind) {
  switch (kind) {
    case OpKind::kForwardLinear:
      return "forward_linear";
    case OpKind::kGradEquation:
      return "grad_equation";
    case OpKind::kInputGradLinear:
      return "input_grad_linear";
  }
  return "?";
}

std::string BehaviorName(Behavior b) {
  switch (b) {
    case Behavior::kHonest:
      return "honest";
    case Behavior::kFaulty:
      return "faulty";
    case Behavior::kColluding:
      return "colluding";
    case Behavior::kUnresponsive:
      return "unresponsive";
  }
  return "?";
}

Behavior ParseBehavior(const std::string& name) {
  if (name == "honest") return Behavior::kHonest;
  if (name == "faulty") return Behavior::kFaulty;
  if (name == "colluding") return Behavior::kColluding;
  if (name == "unresponsive") return Behavior::kUnresponsive;
  throw InvalidArgument("unknown worker behavior '" + name + "'");
}

std::string KnowledgeName(Knowledge k) {
  return k == Knowledge::kNone ? "none" : "coefficients-known";
}

Knowledge ParseKnowledge(const std::string& name) {
  if (name == "none") return Knowledge::kNone;
  if (name == "coefficients-known") return Knowledge::kCoefficientsKnown;
  throw InvalidArgument("unknown adversary knowledge '" + name + "'");
}

void WorkerProfile::Validate() const {
  if (!(perturbation_scale >= 0.0)) {
    throw InvalidArgument("perturbation_scale must be >= 0");
  }
  if (!(fault_probability >= 0.0 && fault_probability <= 1.0)) {
    throw InvalidArgument("fault_probability must lie in [0, 1]");
  }
}

WorkerProfile WorkerProfile::Honest(int id) {
  WorkerProfile p;
  p.worker_id = id;
  return p;
}

WorkerProfile WorkerProfile::Faulty(int id, double scale, double probability) {
  WorkerProfile p;
  p.worker_id = id;
  p.behavior = Behavior::kFaulty;
  p.perturbation_scale = scale;
  p.fault_probability = probability;
  return p;
}

WorkerProfile WorkerProfile::Colluding(int id, int group) {
  WorkerProfile p;
  p.worker_id = id;
  p.behavior = Behavior::kColluding;
  p.group_id = group;
  return p;
}

std::vector<WorkerProfile> HonestWorkers(int count) {
  std::vector<WorkerProfile> out;
  for (int i = 0; i < count; ++i) out.push_back(WorkerProfile::Honest(i));
  return out;
}

void Transcript::Append(Message m) { messages_.push_back(std::move(m)); }

std::string Transcript::ToJsonl() const {
  std::string out;
  char hex[17];
  for (const auto& m : messages_) {
    std::snprintf(hex, sizeof(hex), "%016" PRIx64, m.tensor_digest);
    nlohmann::ordered_json j;
    j["seq"] = m.seq;
    j["from"] = m.from;
    j["to"] = m.to;
    j["kind"] = m.kind;
    j["job_id"] = m.job_id;
    j["tensor_digest"] = hex;
    j["shape"] = m.shape;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::size_t OneEncodingViolations(const Transcript& t) {
  std::map<std::tuple<int, std::int64_t, std::int64_t, std::string>, int> seen;
  for (const auto& m : t.messages()) {
    if (!m.carries_encoding || m.worker < 0) continue;
    ++seen[{m.worker, m.virtual_batch, m.layer, m.stream}];
  }
  return static_cast<std::size_t>(std::count_if(
      seen.begin(), seen.end(), [](const auto& kv) { return kv.second > 1; }));
}

std::size_t SecrecyViolations(const Transcript& t,
                              const std::vector<std::uint64_t>& forbidden) {
  const std::set<std::uint64_t> bad(forbidden.begin(), forbidden.end());
  std::size_t n = 0;
  for (const auto& m : t.messages()) {
    if (m.worker >= 0 && m.to != "coordinator" && bad.count(m.tensor_digest)) ++n;
  }
  return n;
}

Worker::Worker(WorkerProfile profile, std::uint64_t session_seed)
    : profile_(std::move(profile)), session_seed_(session_seed) {
  profile_.Validate();
}

const Tensor& Worker::replica(std::size_t layer) const {
  if (layer >= replicas_.size()) throw InvalidArgument("no replica for layer");
  return replicas_[layer];
}

void Worker::LoadWeights(const std::vector<LayerSpec>& specs,
                         const std::vector<Tensor>& weights,
                         std::uint64_t version) {
  specs_ = specs;
  replicas_ = weights;
  version_ = version;
}

void Worker::ApplyUpdate(std::size_t layer, const Tensor& dW,
                         double learning_rate, std::size_t batch_size,
                         Precision p) {
  const double scale = -learning_rate / static_cast<double>(batch_size);
  replicas_.at(layer) = RoundTo(p, std::move(replicas_.at(layer).Axpy(scale, dW)));
}

Tensor HonestCompute(const LayerSpec& spec, const Tensor& weight,
                     const LinearJob& job, const Tensor& operand, Precision p) {
  switch (job.op) {
    case OpKind::kForwardLinear:
      return LinearForward(spec, weight, operand, p);
    case OpKind::kGradEquation: {
      if (!job.gradient.empty()) return WeightGrad(spec, job.gradient, operand, p);
      Tensor combined = LinearCombination(job.raw_deltas, job.beta_row, p);
      return WeightGrad(spec, combined, operand, p);
    }
    case OpKind::kInputGradLinear:
      return InputGrad(spec, weight, operand, job.input_shape, p);
  }
  throw InvalidArgument("unknown job kind");
}

std::optional<LinearResult> Worker::Step(const LinearJob& job, Precision p) {
  if (profile_.behavior == Behavior::kUnresponsive) return std::nullopt;
  if (job.weights_version != version_) {
    throw StaleWeights("worker " + std::to_string(profile_.worker_id) +
                       " holds weights v" + std::to_string(version_) +
                       ", job " + std::to_string(job.job_id) + " needs v" +
                       std::to_string(job.weights_version));
  }
  if (job.layer >= specs_.size()) throw InvalidArgument("job for unknown layer");
  const Tensor* operand = &job.payload;
  if (!job.payload.empty()) {
    cache_[job.job_id] = job.payload;
  } else {
    auto it = job.ref_job_id ? cache_.find(*job.ref_job_id) : cache_.end();
    if (it == cache_.end()) {
      throw InvalidArgument("job " + std::to_string(job.job_id) +
                            " references an encoding this worker never held");
    }
    operand = &it->second;
  }
  LinearResult r;
  r.job_id = job.job_id;
  r.worker_id = profile_.worker_id;
  r.output = HonestCompute(specs_[job.layer], replicas_[job.layer], job,
                           *operand, p);
  if (profile_.behavior == Behavior::kFaulty && profile_.perturbation_scale > 0.0) {
    Rng rng(DeriveSeed(DeriveSeed(session_seed_, kFaultStream,
                                  static_cast<std::uint64_t>(profile_.worker_id)),
                       0, job.job_id));
    if (rng.Bernoulli(profile_.fault_probability)) {
      const double magnitude = profile_.perturbation_scale * r.output.MaxAbs();
      r.output.Axpy(magnitude, RandomDirection(r.output.shape(), rng));
      r.output = RoundTo(p, std::move(r.output));
    }
  }
  return r;
}

void SessionConfig::Validate() const {
  if (K < 1 || M < 1 || E < 0) throw InvalidArgument("need K >= 1, M >= 1, E >= 0");
  if (!(c_min >= 0.0)) throw InvalidArgument("c_min must be >= 0");
  if (!(noise.variance >= 0.0)) throw InvalidArgument("noise variance must be >= 0");
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
}

int SessionConfig::RequiredWorkers() const {
  return P() + E + (E > 0 && K >= 2 ? 1 : 0);
}

Session::Session(SessionConfig cfg, std::vector<WorkerProfile> workers)
    : cfg_(std::move(cfg)) {
  cfg_.Validate();
  const int needed = cfg_.RequiredWorkers();
  if (static_cast<int>(workers.size()) < needed) {
    throw InsufficientWorkers("K=" + std::to_string(cfg_.K) + ", M=" +
                              std::to_string(cfg_.M) + ", E=" +
                              std::to_string(cfg_.E) + " needs " +
                              std::to_string(needed) + " workers, got " +
                              std::to_string(workers.size()));
  }
  for (std::size_t i = 0; i < workers.size(); ++i) {
    if (workers[i].worker_id != static_cast<int>(i)) {
      throw InvalidArgument("worker ids must be 0 .. n-1 in order");
    }
    workers_.emplace_back(workers[i], cfg_.seed);
  }
  assignment_.resize(workers_.size());
  std::iota(assignment_.begin(), assignment_.end(), 0);
  if (cfg_.permute_assignment) {
    Rng rng(DeriveSeed(cfg_.seed, kAssignStream, 0));
    std::shuffle(assignment_.begin(), assignment_.end(), rng.engine());
  }
}

void Session::Send(Message m) {
  m.seq = next_seq_++;
  transcript_.Append(std::move(m));
}

Worker& Session::WorkerFor(int encoding_index) {
  return workers_[static_cast<std::size_t>(assignment_.at(encoding_index))];
}

void Session::LoadWeights(const std::vector<LayerSpec>& specs,
                          const std::vector<Tensor>& weights) {
  if (specs.size() != weights.size()) {
    throw InvalidArgument("LoadWeights: one weight tensor per layer");
  }
  specs_ = specs;
  weights_ = weights;
  for (auto& w : workers_) {
    for (std::size_t l = 0; l < specs.size(); ++l) {
      if (!specs[l].bilinear()) continue;
      Message m;
      m.from = "coordinator";
      m.to = WorkerName(w.profile().worker_id);
      m.kind = "load_weights";
      m.tensor_digest = Digest(weights[l]);
      m.shape = weights[l].shape();
      m.worker = w.profile().worker_id;
      m.layer = static_cast<std::int64_t>(l);
      Send(std::move(m));
    }
    w.LoadWeights(specs, weights, version_);
  }
}

void Session::BeginVirtualBatch() {
  ++vb_;
  cache_.clear();
  for (auto& w : workers_) w.ClearCache();
}

CodingScheme Session::NewScheme(std::size_t layer, int stream) {
  const std::uint64_t seed =
      DeriveSeed(DeriveSeed(cfg_.seed, kSchemeStream,
                            static_cast<std::uint64_t>(vb_)),
                 static_cast<std::uint64_t>(stream), layer);
  if (cfg_.identity_scheme) return IdentityScheme(cfg_, seed);
  return GenerateScheme(OptionsFor(cfg_, seed));
}

VirtualBatch Session::NewBatch(std::size_t layer, int stream,
                               std::vector<Tensor> inputs) {
  Rng rng(DeriveSeed(DeriveSeed(cfg_.seed, kNoiseStream,
                                static_cast<std::uint64_t>(vb_)),
                     static_cast<std::uint64_t>(stream), layer));
  return MakeVirtualBatch(std::move(inputs), cfg_.M, cfg_.noise, rng);
}

void Session::RecordSecrets(const VirtualBatch& batch,
                            const CodingScheme& scheme) {
  for (const auto& x : batch.inputs) secrets_.push_back(Digest(x));
  secrets_.push_back(MatrixDigest(scheme.A));
  secrets_.push_back(MatrixDigest(scheme.B));
  secrets_.push_back(MatrixDigest(scheme.gamma));
}

std::vector<LinearResult> Session::Dispatch(
    std::vector<LinearJob> jobs, const std::vector<int>& encoding_index,
    const std::string& stream) {
  std::vector<LinearResult> results;
  results.reserve(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    LinearJob& job = jobs[i];
    Worker& w = WorkerFor(encoding_index[i]);
    const int wid = w.profile().worker_id;
    auto base = [&]() {
      Message m;
      m.from = "coordinator";
      m.to = WorkerName(wid);
      m.job_id = job.job_id;
      m.worker = wid;
      m.virtual_batch = vb_;
      m.layer = static_cast<std::int64_t>(job.layer);
      m.stream = stream;
      return m;
    };
    if (!job.payload.empty()) {
      Message m = base();
      m.kind = job.op == OpKind::kGradEquation ? "grad_operand"
                                               : OpKindName(job.op);
      m.tensor_digest = Digest(job.payload);
      m.shape = job.payload.shape();
      m.carries_encoding = true;
      Send(std::move(m));
    }
    if (job.op == OpKind::kGradEquation) {
      Message m = base();
      if (job.gradient.empty()) {
        m.kind = "grad_equation_literal";
        m.tensor_digest = DigestAll(job.raw_deltas);
        m.shape = job.raw_deltas.front().shape();
      } else {
        m.kind = OpKindName(job.op);
        m.tensor_digest = Digest(job.gradient);
        m.shape = job.gradient.shape();
      }
      Send(std::move(m));
    }
    if (w.profile().behavior == Behavior::kColluding && !job.payload.empty()) {
      group_logs_[w.profile().group_id].push_back(
          {vb_, job.layer, stream, encoding_index[i], job.payload});
    }
    auto r = w.Step(job, cfg_.precision);
    if (!r) {
      throw WorkerTimeout("worker " + std::to_string(wid) +
                          " did not answer job " + std::to_string(job.job_id));
    }
    Message m;
    m.from = WorkerName(wid);
    m.to = "coordinator";
    m.kind = "result";
    m.job_id = r->job_id;
    m.tensor_digest = Digest(r->output);
    m.shape = r->output.shape();
    m.virtual_batch = vb_;
    m.layer = static_cast<std::int64_t>(job.layer);
    Send(std::move(m));
    results.push_back(std::move(*r));
  }
  return results;
}

ForwardOutcome Session::Forward(std::size_t layer,
                                const std::vector<Tensor>& inputs) {
  if (vb_ < 0) throw InvalidArgument("call BeginVirtualBatch before Forward");
  if (static_cast<int>(inputs.size()) != cfg_.K) {
    throw InvalidArgument("Forward needs exactly K inputs");
  }
  CodingScheme scheme = NewScheme(layer, kActivationStream);
  VirtualBatch batch = NewBatch(layer, kActivationStream, inputs);
  return ForwardWith(layer, batch, scheme);
}

ForwardOutcome Session::ForwardWith(std::size_t layer, const VirtualBatch& batch,
                                    const CodingScheme& scheme) {
  if (vb_ < 0) BeginVirtualBatch();
  if (layer >= specs_.size() || !specs_[layer].bilinear()) {
    throw InvalidArgument("Forward: layer " + std::to_string(layer) +
                          " is not an offloadable bilinear layer");
  }
  if (scheme.K != cfg_.K || scheme.M != cfg_.M || scheme.E > cfg_.E) {
    throw InvalidArgument("scheme does not match the session's K, M, E");
  }
  RecordSecrets(batch, scheme);
  EncodedBatch enc = Encode(batch, scheme, cfg_.precision);
  std::vector<LinearJob> jobs;
  std::vector<int> index;
  LayerCache entry;
  for (std::size_t e = 0; e < enc.encoded.size(); ++e) {
    LinearJob job;
    job.job_id = NextJobId();
    job.layer = layer;
    job.op = OpKind::kForwardLinear;
    job.payload = std::move(enc.encoded[e]);
    job.weights_version = version_;
    entry.job_ids.push_back(job.job_id);
    jobs.push_back(std::move(job));
    index.push_back(static_cast<int>(e));
  }
  auto results = Dispatch(std::move(jobs), index, StreamName(kActivationStream));
  std::vector<Tensor> ybar;
  for (auto& r : results) ybar.push_back(std::move(r.output));

  ForwardOutcome out;
  out.verdict.tau = cfg_.tau;
  if (scheme.E > 0) out.verdict = VerifyForward(ybar, scheme, cfg_.tau, cfg_.precision);
  out.outputs = DecodeForward(ybar, scheme, cfg_.precision);

  entry.scheme = scheme;
  entry.batch = batch;
  entry.valid = true;
  cache_[layer] = std::move(entry);
  return out;
}

GradOutcome Session::WeightGrad(std::size_t layer,
                                const std::vector<Tensor>& deltas) {
  auto it = cache_.find(layer);
  if (it == cache_.end() || !it->second.valid) {
    throw InvalidArgument("WeightGrad: no cached forward encodings for layer " +
                          std::to_string(layer));
  }
  const LayerCache& c = it->second;
  const CodingScheme& s = c.scheme;
  const bool with_check = s.HasGradCheck();
  const int P = s.P();
  std::vector<Tensor> combined;
  if (!cfg_.paper_literal) {
    combined = CombineGradients(deltas, s, with_check, cfg_.precision);
  } else if (static_cast<int>(deltas.size()) != s.K) {
    throw InvalidArgument("WeightGrad: expected K deltas");
  }
  auto make_job = [&](int row, const Vector& beta) {
    LinearJob job;
    job.job_id = NextJobId();
    job.layer = layer;
    job.op = OpKind::kGradEquation;
    job.weights_version = version_;
    if (cfg_.paper_literal) {
      job.raw_deltas = deltas;
      job.beta_row.assign(beta.data(), beta.data() + beta.size());
    } else {
      job.gradient = combined[static_cast<std::size_t>(row)];
    }
    return job;
  };

  std::vector<LinearJob> jobs;
  std::vector<int> index;
  for (int j = 0; j < P; ++j) {
    LinearJob job = make_job(j, s.B.row(j).transpose());
    job.ref_job_id = c.job_ids[static_cast<std::size_t>(j)];
    jobs.push_back(std::move(job));
    index.push_back(j);
  }
  if (with_check) {
    LinearJob job = make_job(P, s.grad_ext_b);
    if (s.grad_ext_reuses_forward) {
      job.ref_job_id = c.job_ids[static_cast<std::size_t>(P)];
      index.push_back(P);
    } else {
      job.payload = EncodeColumn(c.batch, s.grad_ext_a, cfg_.precision);
      index.push_back(P + s.E);
    }
    jobs.push_back(std::move(job));
  }
  auto results = Dispatch(std::move(jobs), index, StreamName(kActivationStream));
  std::vector<Tensor> eqs;
  for (auto& r : results) eqs.push_back(std::move(r.output));

  GradOutcome out;
  out.verdict.tau = cfg_.tau;
  if (with_check) out.verdict = VerifyGrad(eqs, s, cfg_.tau, cfg_.precision);
  out.sum = DecodeGrad(eqs, s, cfg_.precision);
  return out;
}

InputGradOutcome Session::InputGrad(std::size_t layer,
                                    const std::vector<Tensor>& deltas) {
  auto it = cache_.find(layer);
  if (it == cache_.end() || !it->second.valid) {
    throw InvalidArgument("InputGrad: no forward pass recorded for layer " +
                          std::to_string(layer));
  }
  const Shape input_shape = it->second.batch.shape();
  InputGradOutcome out;
  out.verdict.tau = cfg_.tau;
  if (!cfg_.offload_input_grad) {
    const Tensor& w = weights_[layer];
    for (const auto& d : deltas) {
      out.deltas.push_back(
          vbmask::InputGrad(specs_[layer], w, d, input_shape, cfg_.precision));
    }
    return out;
  }
  if (static_cast<int>(deltas.size()) != cfg_.K) {
    throw InvalidArgument("InputGrad needs exactly K deltas");
  }
  CodingScheme scheme = NewScheme(layer, kDeltaStream);
  VirtualBatch batch = NewBatch(layer, kDeltaStream, deltas);
  RecordSecrets(batch, scheme);
  EncodedBatch enc = Encode(batch, scheme, cfg_.precision);
  std::vector<LinearJob> jobs;
  std::vector<int> index;
  for (std::size_t e = 0; e < enc.encoded.size(); ++e) {
    LinearJob job;
    job.job_id = NextJobId();
    job.layer = layer;
    job.op = OpKind::kInputGradLinear;
    job.payload = std::move(enc.encoded[e]);
    job.input_shape = input_shape;
    job.weights_version = version_;
    jobs.push_back(std::move(job));
    index.push_back(static_cast<int>(e));
  }
  auto results = Dispatch(std::move(jobs), index, StreamName(kDeltaStream));
  std::vector<Tensor> ybar;
  for (auto& r : results) ybar.push_back(std::move(r.output));
  if (scheme.E > 0) out.verdict = VerifyForward(ybar, scheme, cfg_.tau, cfg_.precision);
  out.deltas = DecodeForward(ybar, scheme, cfg_.precision);
  return out;
}

std::uint64_t Session::BroadcastUpdate(const std::vector<Tensor>& dW_sums,
                                       double learning_rate,
                                       std::size_t batch_size) {
  if (dW_sums.size() != specs_.size()) {
    throw InvalidArgument("BroadcastUpdate: one gradient per layer");
  }
  ++version_;
  const double scale = -learning_rate / static_cast<double>(batch_size);
  for (std::size_t l = 0; l < specs_.size(); ++l) {
    if (!specs_[l].bilinear()) continue;
    weights_[l] = RoundTo(cfg_.precision, std::move(weights_[l].Axpy(scale, dW_sums[l])));
  }
  for (auto& w : workers_) {
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      if (!specs_[l].bilinear()) continue;
      Message m;
      m.from = "coordinator";
      m.to = WorkerName(w.profile().worker_id);
      m.kind = "update";
      m.tensor_digest = Digest(dW_sums[l]);
      m.shape = dW_sums[l].shape();
      m.worker = w.profile().worker_id;
      m.layer = static_cast<std::int64_t>(l);
      Send(std::move(m));
      w.ApplyUpdate(l, dW_sums[l], learning_rate, batch_size, cfg_.precision);
    }
    w.SetVersion(version_);
  }
  return version_;
}

const CodingScheme& Session::LastScheme(std::size_t layer) const {
  return cache_.at(layer).scheme;
}

const VirtualBatch& Session::LastBatch(std::size_t layer) const {
  return cache_.at(layer).batch;
}

const std::vector<CollusionEntry>& Session::GroupLog(int group) const {
  static const std::vector<CollusionEntry> kEmpty;
  auto it = group_logs_.find(group);
  return it == group_logs_.end() ? kEmpty : it->second;
}

CollusionLog Session::GroupLogFor(int group, std::int64_t virtual_batch,
                                  std::size_t layer,
                                  const std::string& stream) const {
  CollusionLog log;
  log.group_id = group;
  for (const auto& e : GroupLog(group)) {
    if (e.virtual_batch == virtual_batch && e.layer == layer &&
        e.stream == stream) {
      log.payloads.emplace_back(e.encoding_index, e.payload);
    }
  }
  return log;
}

VirtualBatchRun RunVirtualBatch(const VirtualBatch& batch,
                                const LayerSpec& layer, const Tensor& weight,
                                const std::vector<WorkerProfile>& workers,
                                const SessionConfig& cfg,
                                const CodingScheme* scheme) {
  Session session(cfg, workers);
  session.LoadWeights({layer}, {weight});
  session.BeginVirtualBatch();
  CodingScheme drawn;
  if (!scheme) {
    const std::uint64_t seed = DeriveSeed(cfg.seed, kSchemeStream, 0);
    drawn = cfg.identity_scheme ? IdentityScheme(cfg, seed)
                                : GenerateScheme(OptionsFor(cfg, seed));
    scheme = &drawn;
  }
  auto out = session.ForwardWith(0, batch, *scheme);
  return {std::move(out.outputs), out.verdict, session.transcript()};
}

}  // namespace vbmask
