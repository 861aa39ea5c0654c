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

#include "vbmask/attack.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "vbmask/errors.h"
#include "vbmask/io.h"

namespace vbmask {
namespace {

constexpr std::uint64_t kTrialStream = 0x5452;  // "TR"
constexpr std::uint64_t kInputStream = 0x494e;  // "IN"

double Mse(const Tensor& estimate, const Tensor& truth) {
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = estimate[i] - truth[i];
    s += d * d;
  }
  return s / static_cast<double>(truth.size());
}

}  // namespace

AttackEstimate ReconstructLeastSquares(const CollusionLog& log,
                                       const CodingScheme& scheme,
                                       const std::vector<Tensor>& truth,
                                       double ridge) {
  if (static_cast<int>(truth.size()) != scheme.K) {
    throw InvalidArgument("ReconstructLeastSquares: need K ground-truth inputs");
  }
  const Shape shape = truth.front().shape();
  const std::size_t n = truth.front().size();
  AttackEstimate est;
  est.inputs.assign(truth.size(), Tensor(shape));

  if (!log.payloads.empty() && log.knowledge == Knowledge::kCoefficientsKnown) {
    const int P = scheme.P();
    const auto S = static_cast<Eigen::Index>(log.payloads.size());
    Matrix a_s(P, S);   // coefficients of the observed encodings
    Matrix obs(S, static_cast<Eigen::Index>(n));
    for (Eigen::Index k = 0; k < S; ++k) {
      const auto& [index, payload] = log.payloads[static_cast<std::size_t>(k)];
      if (index < 0 || index >= scheme.P() + scheme.E) {
        throw InvalidArgument("collusion log names an unknown encoding");
      }
      a_s.col(k) = index < P ? scheme.A.col(index) : scheme.A_ext.col(index - P);
      RequireShape(payload, shape, "collusion payload");
      for (std::size_t i = 0; i < n; ++i) obs(k, static_cast<Eigen::Index>(i)) = payload[i];
    }
    // (A_S A_S^T + ridge I) Z = A_S O.
    Matrix normal = a_s * a_s.transpose();
    normal.diagonal().array() += ridge;
    const Matrix z = normal.ldlt().solve(a_s * obs);
    for (int k = 0; k < scheme.K; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        est.inputs[static_cast<std::size_t>(k)][i] = z(k, static_cast<Eigen::Index>(i));
      }
    }
  }
  for (std::size_t k = 0; k < truth.size(); ++k) {
    est.mse_per_input.push_back(Mse(est.inputs[k], truth[k]));
    est.mse += est.mse_per_input.back();
  }
  est.mse /= static_cast<double>(truth.size());
  return est;
}

void AttackConfig::Validate() const {
  if (K < 1 || M < 1) throw InvalidArgument("attack needs K >= 1, M >= 1");
  if (colluders < 0 || colluders > K + M) {
    throw InvalidArgument("colluders must lie in [0, K + M]");
  }
  if (!(sigma2 >= 0.0)) throw InvalidArgument("sigma2 must be >= 0");
  if (dim == 0) throw InvalidArgument("dim must be >= 1");
}

AttackTrial RunAttackTrial(const AttackConfig& cfg, std::uint64_t trial_seed,
                           const PrivacyParams& params) {
  cfg.Validate();
  SessionConfig sc;
  sc.K = cfg.K;
  sc.M = cfg.M;
  sc.E = 0;
  sc.c_min = cfg.c_min;
  sc.noise = {cfg.noise_mean, cfg.sigma2};
  sc.seed = trial_seed;
  sc.permute_assignment = true;
  std::vector<WorkerProfile> workers;
  for (int w = 0; w < sc.RequiredWorkers(); ++w) {
    workers.push_back(w < cfg.colluders ? WorkerProfile::Colluding(w, 0)
                                        : WorkerProfile::Honest(w));
  }
  Session session(sc, workers);
  Rng rng(DeriveSeed(trial_seed, kInputStream, 0));
  const LayerSpec layer = LayerSpec::Dense(cfg.dim, 1);
  session.LoadWeights({layer}, {rng.NormalTensor(layer.WeightShape(), 0.0, 1.0)});
  std::vector<Tensor> inputs;
  for (int k = 0; k < cfg.K; ++k) {
    inputs.push_back(rng.NormalTensor({cfg.dim}, 0.0, 1.0));
  }
  session.BeginVirtualBatch();
  session.Forward(0, inputs);

  CollusionLog log = session.GroupLogFor(0, session.virtual_batch(), 0);
  log.knowledge = cfg.knowledge;
  const auto est = ReconstructLeastSquares(log, session.LastScheme(0), inputs);

  AttackTrial t;
  t.seed = trial_seed;
  t.colluders = cfg.colluders;
  t.M = cfg.M;
  t.sigma2 = cfg.sigma2;
  t.mse = est.mse;
  double second = 0.0;
  for (const auto& x : inputs) {
    for (double v : x.values()) second += v * v;
  }
  t.input_var = second / static_cast<double>(cfg.K * cfg.dim);
  if (cfg.sigma2 > 0.0) {
    PrivacyParams p = params;
    p.sigma2 = cfg.sigma2;
    t.bound_colluding = MiBoundColluding(p);
  } else {
    t.bound_colluding = std::numeric_limits<double>::infinity();
  }
  return t;
}

std::vector<AttackTrial> LeakageReport(int trials, const PrivacyParams& params,
                                       const AttackConfig& cfg) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  std::vector<AttackTrial> rows;
  for (int i = 0; i < trials; ++i) {
    rows.push_back(RunAttackTrial(
        cfg, DeriveSeed(cfg.seed, kTrialStream, static_cast<std::uint64_t>(i)),
        params));
  }
  return rows;
}

std::string AttackCsv(const std::vector<AttackTrial>& rows) {
  std::ostringstream out;
  out << "seed,colluders,M,sigma2,mse,bound_colluding\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << r.colluders << ',' << r.M << ','
        << FormatDouble(r.sigma2) << ',' << FormatDouble(r.mse) << ','
        << FormatDouble(r.bound_colluding) << '\n';
  }
  return out.str();
}

}  // namespace vbmask
