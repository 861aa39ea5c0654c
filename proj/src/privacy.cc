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

#include "vbmask/privacy.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "vbmask/errors.h"
#include "vbmask/io.h"

namespace vbmask {
namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kF32RoundOff = 0x1p-24;

// log((1 + e^t) / 2) without cancellation near t = 0 or overflow for large t.
double LogHalfOnePlusExp(double t) {
  if (t > 30.0) return t - kLn2 + std::log1p(std::exp(-t));
  return std::log1p(std::expm1(t) / 2.0);
}

// Numerator of a bound that scales as 1 / sigma2.
double NumeratorOf(const PrivacyParams& p, BoundKind which) {
  PrivacyParams unit = p;
  unit.sigma2 = 1.0;
  return EvaluateBound(unit, which);
}

}  // namespace

void PrivacyParams::Validate() const {
  if (K < 1 || M < 0) throw InvalidArgument("privacy params need K >= 1, M >= 0");
  if (!(c1 >= 0.0)) throw InvalidArgument("C1 must be non-negative");
  if (!(sigma2 > 0.0)) throw InvalidArgument("sigma2 must be positive");
  if (ratio_sq) {
    if (!(*ratio_sq >= 1.0)) throw InvalidArgument("alpha ratio must be >= 1");
  } else if (!(alpha_min > 0.0) || !(alpha_max >= alpha_min)) {
    throw InvalidArgument("need alpha_max >= alpha_min > 0");
  }
  if (!(c_min > 0.0)) throw InvalidArgument("C_min must be positive");
  if (!(var_sum >= 0.0)) throw InvalidArgument("var_sum must be non-negative");
}

PrivacyParams ParamsFromScheme(const CodingScheme& scheme, double c1,
                               double sigma2, double var_sum) {
  PrivacyParams p;
  p.K = scheme.K;
  p.M = scheme.M;
  p.c1 = c1;
  p.sigma2 = sigma2;
  p.alpha_max = MaxAbsCoefficient(scheme);
  p.alpha_min = MinAbsCoefficient(scheme);
  p.c_min = NoiseColumnNorms(scheme).minCoeff();
  p.var_sum = var_sum;
  return p;
}

double MiBoundSingle(const PrivacyParams& p) {
  p.Validate();
  return (p.K * p.c1 * p.c1 * p.alpha_ratio_sq()) / (2.0 * p.sigma2);
}

double MiBoundJoint(const PrivacyParams& p) {
  p.Validate();
  const double k2 = static_cast<double>(p.K) * p.K;
  return (16.0 * k2 * k2 * p.c1 * p.c1) / p.sigma2;
}

double MiBoundColluding(const PrivacyParams& p) {
  p.Validate();
  return p.var_sum / (p.c_min * p.sigma2);
}

BoundKind ParseBoundKind(const std::string& name) {
  if (name == "single") return BoundKind::kSingle;
  if (name == "joint") return BoundKind::kJoint;
  if (name == "colluding") return BoundKind::kColluding;
  throw InvalidArgument("unknown bound '" + name +
                        "' (expected single, joint or colluding)");
}

double EvaluateBound(const PrivacyParams& p, BoundKind which) {
  switch (which) {
    case BoundKind::kSingle:
      return MiBoundSingle(p);
    case BoundKind::kJoint:
      return MiBoundJoint(p);
    case BoundKind::kColluding:
      return MiBoundColluding(p);
  }
  return 0.0;
}

double RequiredSigma2(double target_leakage, const PrivacyParams& p,
                      BoundKind which) {
  if (!(target_leakage > 0.0)) {
    throw InvalidArgument("target leakage must be positive");
  }
  const double numerator = NumeratorOf(p, which);
  if (numerator == 0.0) return 0.0;
  PrivacyParams q = p;
  q.sigma2 = numerator / target_leakage;
  // Rounding can leave the bound one ulp above target.
  while (EvaluateBound(q, which) > target_leakage) {
    q.sigma2 = std::nextafter(q.sigma2, INFINITY);
  }
  // ... or one ulp above the smallest admissible value.
  for (PrivacyParams lower = q;;) {
    lower.sigma2 = std::nextafter(q.sigma2, 0.0);
    if (!(lower.sigma2 > 0.0) || EvaluateBound(lower, which) > target_leakage) break;
    q.sigma2 = lower.sigma2;
  }
  return q.sigma2;
}

double MiOracleScalar(double c1, double a, double b, double sigma2, int grid) {
  if (b == 0.0) throw InvalidArgument("MiOracleScalar: b must be nonzero");
  if (!(sigma2 > 0.0)) throw InvalidArgument("MiOracleScalar: sigma2 must be positive");
  if (grid < 1000) throw InvalidArgument("MiOracleScalar: grid must be >= 1000");
  if (c1 == 0.0 || a == 0.0) return 0.0;
  // Normalised channel: Y = +-mu + U with U ~ N(0, 1).
  const double mu = std::abs(a) * c1 / (std::abs(b) * std::sqrt(sigma2));
  // I = E_U[-log((1 + exp(-2 mu (U + mu))) / 2)], integrated over |u| <= 12.
  const int n = grid % 2 == 0 ? grid : grid + 1;
  const double lo = -12.0, hi = 12.0;
  const double h = (hi - lo) / n;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = lo + h * i;
    const double f = inv_sqrt_2pi * std::exp(-0.5 * u * u) *
                     -LogHalfOnePlusExp(-2.0 * mu * (u + mu));
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * f;
  }
  const double mi = sum * h / 3.0;
  return std::clamp(mi, 0.0, kLn2);
}

double ScalarChannelBound(double c1, double a, double b, double sigma2) {
  if (b == 0.0) throw InvalidArgument("ScalarChannelBound: b must be nonzero");
  return std::min(a * a * c1 * c1 / (2.0 * b * b * sigma2), kLn2);
}

bool PerfectPrivacyF32(double bound) { return bound < kF32RoundOff; }

std::vector<TableRow> PaperTableRows() {
  return {{4e3, 1.6e7}, {1e4, 2.5e7}, {1e4, 1e8}, {0.0, 4e8}};
}

PrivacyParams PaperTableParams(double sigma2) {
  PrivacyParams p;
  p.K = 2;
  p.M = 1;
  p.c1 = 1.0;
  p.sigma2 = sigma2;
  p.ratio_sq = 20.0;
  p.c_min = 1.0;
  p.var_sum = p.K * p.c1 * p.c1;
  return p;
}

PrivacyParams ReferenceParams(double sigma2) {
  PrivacyParams p = PaperTableParams(sigma2);
  p.ratio_sq = 10.0;
  return p;
}

std::string PrivacyCsv(const std::vector<PrivacyParams>& rows) {
  std::ostringstream out;
  out << "K,M,C1,sigma2,alpha_ratio,bound_single,bound_joint,bound_colluding,"
         "perfect_privacy_f32\n";
  for (const auto& p : rows) {
    const double single = MiBoundSingle(p);
    out << p.K << ',' << p.M << ',' << FormatDouble(p.c1) << ','
        << FormatDouble(p.sigma2) << ',' << FormatDouble(p.alpha_ratio_sq())
        << ',' << FormatDouble(single) << ',' << FormatDouble(MiBoundJoint(p))
        << ',' << FormatDouble(MiBoundColluding(p)) << ','
        << (PerfectPrivacyF32(single) ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace vbmask
