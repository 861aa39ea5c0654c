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

#include <sstream>

#include <gtest/gtest.h>

#include "vbmask/errors.h"
#include "vbmask/privacy.h"

namespace vbmask {
namespace {

AttackConfig Config(int K, int M, int colluders, double sigma2) {
  AttackConfig c;
  c.K = K;
  c.M = M;
  c.colluders = colluders;
  c.sigma2 = sigma2;
  c.seed = 77;
  return c;
}

PrivacyParams Params() {
  PrivacyParams p;
  p.var_sum = 32.0;
  p.c_min = 0.1;
  return p;
}

double MeanRatio(const std::vector<AttackTrial>& rows) {
  double s = 0.0;
  for (const auto& r : rows) s += r.mse / r.input_var;
  return s / static_cast<double>(rows.size());
}

TEST(Attack, MColludersLearnNothingUsable) {
  for (int M = 1; M <= 2; ++M) {
    for (const auto& r : LeakageReport(20, Params(), Config(2, M, M, 1e8))) {
      EXPECT_GE(r.mse, 0.5 * r.input_var) << "M=" << M << " seed " << r.seed;
    }
  }
}

TEST(Attack, OneMoreColluderRecoversSingleInput) {
  for (int M = 1; M <= 2; ++M) {
    for (const auto& r : LeakageReport(20, Params(), Config(1, M, M + 1, 1e8))) {
      EXPECT_LE(r.mse, 1e-8 * r.input_var) << "M=" << M << " seed " << r.seed;
    }
  }
}

TEST(Attack, AllWorkersColludingRecoverEverything) {
  for (const auto& r : LeakageReport(10, Params(), Config(3, 1, 4, 1e8))) {
    EXPECT_LE(r.mse, 1e-8 * r.input_var);
  }
}

TEST(Attack, ZeroNoiseFullCollusionIsExact) {
  const auto rows = LeakageReport(5, Params(), Config(2, 1, 3, 0.0));
  for (const auto& r : rows) {
    EXPECT_LT(r.mse, 1e-14 * r.input_var);  // exact up to the ridge term
    EXPECT_TRUE(std::isinf(r.bound_colluding));
  }
}

TEST(Attack, NoObservationsGivesPriorVariance) {
  for (const auto& r : LeakageReport(5, Params(), Config(2, 1, 0, 1e8))) {
    EXPECT_DOUBLE_EQ(r.mse, r.input_var);
  }
}

TEST(Attack, UnknownCoefficientsFallBackToPrior) {
  AttackConfig c = Config(1, 1, 2, 1e8);
  c.knowledge = Knowledge::kNone;
  for (const auto& r : LeakageReport(5, Params(), c)) EXPECT_DOUBLE_EQ(r.mse, r.input_var);
}

TEST(Attack, MseNondecreasingInNoise) {
  double prev = -1.0;
  for (double s2 : {1e-2, 1.0, 1e2, 1e4}) {
    const double m = MeanRatio(LeakageReport(30, Params(), Config(2, 1, 1, s2)));
    EXPECT_GE(m, prev - 0.02) << "sigma2 " << s2;
    prev = m;
  }
}

TEST(Attack, BoundPassThroughAndDeterminism) {
  const auto p = Params();
  const auto rows = LeakageReport(1, p, Config(2, 1, 1, 1e8));
  PrivacyParams q = p;
  q.sigma2 = 1e8;
  EXPECT_EQ(rows[0].bound_colluding, MiBoundColluding(q));
  const auto again = LeakageReport(1, p, Config(2, 1, 1, 1e8));
  EXPECT_EQ(AttackCsv(rows), AttackCsv(again));
}

TEST(Attack, CsvLayout) {
  const auto rows = LeakageReport(2, Params(), Config(2, 1, 1, 1e8));
  std::istringstream in(AttackCsv(rows));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "seed,colluders,M,sigma2,mse,bound_colluding");
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 2);
}

TEST(Attack, RejectsBadConfig) {
  EXPECT_THROW(LeakageReport(0, Params(), Config(2, 1, 1, 1e8)), InvalidArgument);
  EXPECT_THROW(LeakageReport(1, Params(), Config(2, 1, 4, 1e8)), InvalidArgument);
}

}  // namespace
}  // namespace vbmask
