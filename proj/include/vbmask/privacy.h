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

// Closed-form mutual-information leakage bounds for masked encodings, in
// nats, plus a numerical integrator for the binary-input Gaussian channel
// used to sanity-check them.

#ifndef VBMASK_PRIVACY_H_
#define VBMASK_PRIVACY_H_

#include <optional>
#include <string>
#include <vector>

#include "vbmask/coding.h"

namespace vbmask {

struct PrivacyParams {
  int K = 2;
  int M = 1;
  double c1 = 1.0;         // |x| <= c1 for every input coordinate
  double sigma2 = 1e8;     // noise variance
  double alpha_max = 1.0;  // max |A(s, j)|
  double alpha_min = 1.0;  // min |A(s, j)|
  double c_min = 1.0;      // floor on noise-coefficient column norms
  double var_sum = 0.0;    // sum of input variances, colluding bound only
  // When set, used instead of (alpha_max / alpha_min)^2. Lets presets state
  // the squared ratio exactly rather than through a rounded square root.
  std::optional<double> ratio_sq;

  void Validate() const;
  double alpha_ratio_sq() const {
    return ratio_sq ? *ratio_sq
                    : (alpha_max * alpha_max) / (alpha_min * alpha_min);
  }
};

// Fills alpha_max, alpha_min and c_min from a generated scheme.
PrivacyParams ParamsFromScheme(const CodingScheme& scheme, double c1,
                               double sigma2, double var_sum = 0.0);

// One encoding's leakage about one input: K c1^2 amax^2 / (2 amin^2 sigma2).
double MiBoundSingle(const PrivacyParams& p);
// All K+1 encodings about all K inputs, Gaussian coefficients:
// 16 K^4 c1^2 / sigma2.
double MiBoundJoint(const PrivacyParams& p);
// M colluding workers: var_sum / (c_min sigma2).
double MiBoundColluding(const PrivacyParams& p);

enum class BoundKind { kSingle, kJoint, kColluding };

BoundKind ParseBoundKind(const std::string& name);
double EvaluateBound(const PrivacyParams& p, BoundKind which);

// Smallest sigma2 whose selected bound is <= target.
double RequiredSigma2(double target_leakage, const PrivacyParams& p,
                      BoundKind which);

// I(X; aX + bR) for X uniform on {-c1, +c1} and R ~ N(0, sigma2), by
// composite Simpson integration on `grid` intervals.
double MiOracleScalar(double c1, double a, double b, double sigma2,
                      int grid = 4000);

// Gaussian-channel bound for the same channel: min(a^2 c1^2 / (2 b^2 sigma2),
// ln 2).
double ScalarChannelBound(double c1, double a, double b, double sigma2);

// Leakage below the f32 unit round-off (2^-24).
bool PerfectPrivacyF32(double bound);

// The reference noise table calibrates every row to bound = 20 / sigma2:
// K = 2, c1 = 1 and amax^2 / amin^2 = 20.
struct TableRow {
  double noise_mean;
  double sigma2;
};
std::vector<TableRow> PaperTableRows();
PrivacyParams PaperTableParams(double sigma2);
// The stated analysis parameters: K = 2, c1 = 1, amax^2 / amin^2 = 10.
PrivacyParams ReferenceParams(double sigma2);

// CSV with columns K,M,C1,sigma2,alpha_ratio,bound_single,bound_joint,
// bound_colluding,perfect_privacy_f32. alpha_ratio is amax^2 / amin^2;
// perfect_privacy_f32 is judged on bound_single.
std::string PrivacyCsv(const std::vector<PrivacyParams>& rows);

}  // namespace vbmask

#endif  // VBMASK_PRIVACY_H_
