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

// Reconstruction attacks by colluding workers. The default adversary knows
// the coding coefficients, which is strictly stronger than anything a real
// worker can observe.

#ifndef VBMASK_ATTACK_H_
#define VBMASK_ATTACK_H_

#include <cstdint>
#include <string>
#include <vector>

#include "vbmask/coding.h"
#include "vbmask/privacy.h"
#include "vbmask/protocol.h"

namespace vbmask {

inline constexpr double kAttackRidge = 1e-9;

struct AttackEstimate {
  std::vector<Tensor> inputs;        // K estimates
  std::vector<double> mse_per_input;
  double mse = 0.0;                  // mean over inputs
};

// Solves min ||A(:, S)^T z - observed||^2 + ridge ||z||^2 per coordinate over
// all P sources and keeps the first K. With no observations, or without
// coefficient knowledge, the estimate is the prior mean (zero).
AttackEstimate ReconstructLeastSquares(const CollusionLog& log,
                                       const CodingScheme& scheme,
                                       const std::vector<Tensor>& truth,
                                       double ridge = kAttackRidge);

struct AttackConfig {
  int K = 2;
  int M = 1;
  int colluders = 1;
  double sigma2 = 1e8;
  double noise_mean = 0.0;
  double c_min = 0.1;
  std::size_t dim = 16;
  Knowledge knowledge = Knowledge::kCoefficientsKnown;
  std::uint64_t seed = 1;

  void Validate() const;
};

struct AttackTrial {
  std::uint64_t seed = 0;
  int colluders = 0;
  int M = 0;
  double sigma2 = 0.0;
  double mse = 0.0;
  double input_var = 0.0;  // empirical second moment of the inputs
  double bound_colluding = 0.0;
};

// One masked forward offload through a session whose first `colluders`
// workers pool their payloads, followed by the reconstruction attack.
// Inputs are i.i.d. N(0, 1).
AttackTrial RunAttackTrial(const AttackConfig& cfg, std::uint64_t trial_seed,
                           const PrivacyParams& params);

// `trials` independent trials with seeds derived from cfg.seed.
std::vector<AttackTrial> LeakageReport(int trials, const PrivacyParams& params,
                                       const AttackConfig& cfg);

// Columns: seed,colluders,M,sigma2,mse,bound_colluding.
std::string AttackCsv(const std::vector<AttackTrial>& rows);

}  // namespace vbmask

#endif  // VBMASK_ATTACK_H_
