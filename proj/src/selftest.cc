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

#include "vbmask/selftest.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include "vbmask/attack.h"
#include "vbmask/coding.h"
#include "vbmask/errors.h"
#include "vbmask/io.h"
#include "vbmask/model.h"
#include "vbmask/privacy.h"
#include "vbmask/protocol.h"
#include "vbmask/training.h"

namespace vbmask {
namespace {

struct Probe {
  LayerSpec spec;
  Shape input;
};

std::vector<Probe> Probes() {
  return {{LayerSpec::Dense(6, 4), {6}}, {LayerSpec::Conv2d(2, 3, 3, 1, 1), {2, 5, 5}}};
}

// Worst relative error of masked forward and backward decoding.
std::pair<double, double> DecodeErrors(int K, int M, const Probe& probe,
                                       std::uint64_t seed) {
  Rng rng(seed);
  SchemeOptions opts;
  opts.K = K;
  opts.M = M;
  opts.c_min = 0.1;
  opts.seed = DeriveSeed(seed, 1, 0);
  const CodingScheme s = GenerateScheme(opts);
  const Tensor w = rng.NormalTensor(probe.spec.WeightShape(), 0.0, 1.0);
  std::vector<Tensor> xs;
  for (int k = 0; k < K; ++k) xs.push_back(rng.NormalTensor(probe.input, 0.0, 1.0));
  const VirtualBatch batch = MakeVirtualBatch(xs, M, {0.0, 1e8}, rng);
  const EncodedBatch enc = Encode(batch, s);
  std::vector<Tensor> ybar;
  for (const auto& e : enc.encoded) ybar.push_back(LinearForward(probe.spec, w, e));
  const auto decoded = DecodeForward(ybar, s);
  double fwd = 0.0;
  std::vector<Tensor> deltas;
  for (int k = 0; k < K; ++k) {
    const Tensor plain = LinearForward(probe.spec, w, xs[k]);
    fwd = std::max(fwd, RelError(decoded[k], plain));
    deltas.push_back(rng.NormalTensor(plain.shape(), 0.0, 1.0));
  }
  const auto combined = CombineGradients(deltas, s);
  std::vector<Tensor> eqs;
  for (int j = 0; j < s.P(); ++j) {
    eqs.push_back(WeightGrad(probe.spec, combined[j], enc.encoded[j]));
  }
  Tensor expected(probe.spec.WeightShape());
  for (int k = 0; k < K; ++k) expected += WeightGrad(probe.spec, deltas[k], xs[k]);
  return {fwd, RelError(DecodeGrad(eqs, s), expected)};
}

SelftestItem Check(const std::string& name, const std::function<std::string(bool&)>& f) {
  SelftestItem item;
  item.name = name;
  try {
    item.detail = f(item.passed);
  } catch (const std::exception& e) {
    item.passed = false;
    item.detail = std::string("exception: ") + e.what();
  }
  return item;
}

}  // namespace

std::vector<SelftestItem> RunSelftest(std::uint64_t seed) {
  std::vector<SelftestItem> out;

  out.push_back(Check("scheme constraints", [&](bool& ok) {
    double worst = 0.0, ortho = 0.0;
    for (int K = 1; K <= 4; ++K) {
      for (int M = 1; M <= 2; ++M) {
        SchemeOptions o;
        o.K = K;
        o.M = M;
        o.E = 1;
        o.c_min = 0.1;
        o.seed = DeriveSeed(seed, 2, static_cast<std::uint64_t>(K * 8 + M));
        const auto s = GenerateScheme(o);
        worst = std::max({worst, ConstraintResidual(s), GradCheckResidual(s)});
        if (M == 1) ortho = std::max(ortho, OrthogonalityResidual(s));
      }
    }
    ok = worst < 1e-10 && ortho < 1e-10;
    return "max constraint residual " + FormatDouble(worst) + ", orthogonality " +
           FormatDouble(ortho);
  }));

  out.push_back(Check("decode exactness", [&](bool& ok) {
    double fwd = 0.0, bwd = 0.0;
    std::uint64_t trial = 0;
    for (int K = 1; K <= 4; ++K) {
      for (int M = 1; M <= 2; ++M) {
        for (const auto& probe : Probes()) {
          auto [f, b] = DecodeErrors(K, M, probe, DeriveSeed(seed, 3, trial++));
          fwd = std::max(fwd, f);
          bwd = std::max(bwd, b);
        }
      }
    }
    ok = fwd < 1e-8 && bwd < 1e-8;
    return "forward rel " + FormatDouble(fwd) + ", backward rel " + FormatDouble(bwd);
  }));

  out.push_back(Check("privacy table", [&](bool& ok) {
    const double expected[] = {1.25e-6, 8e-7, 2e-7, 5e-8};
    ok = true;
    const auto rows = PaperTableRows();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      ok = ok && MiBoundSingle(PaperTableParams(rows[i].sigma2)) == expected[i];
    }
    ok = ok && MiBoundSingle(ReferenceParams(4e8)) == 2.5e-8;
    return std::string(ok ? "table reproduced" : "table mismatch");
  }));

  out.push_back(Check("integrity detection", [&](bool& ok) {
    const LayerSpec layer = LayerSpec::Dense(8, 6);
    int missed = 0, false_alarms = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
      SessionConfig cfg;
      cfg.seed = DeriveSeed(seed, 4, static_cast<std::uint64_t>(t));
      Rng rng(cfg.seed);
      const Tensor w = rng.NormalTensor(layer.WeightShape(), 0.0, 1.0);
      std::vector<Tensor> xs{rng.NormalTensor({8}, 0.0, 1.0), rng.NormalTensor({8}, 0.0, 1.0)};
      const auto batch = MakeVirtualBatch(xs, cfg.M, cfg.noise, rng);
      auto honest = RunVirtualBatch(batch, layer, w, HonestWorkers(cfg.RequiredWorkers()), cfg);
      false_alarms += !honest.verdict.passed;
      auto workers = HonestWorkers(cfg.RequiredWorkers());
      const int bad = static_cast<int>(rng.Index(static_cast<std::uint64_t>(cfg.P() + cfg.E)));
      workers[static_cast<std::size_t>(bad)] = WorkerProfile::Faulty(bad, 1e3 * cfg.tau);
      auto faulty = RunVirtualBatch(batch, layer, w, workers, cfg);
      missed += faulty.verdict.passed;
    }
    ok = missed == 0 && false_alarms == 0;
    return std::to_string(missed) + " missed, " + std::to_string(false_alarms) +
           " false alarms over " + std::to_string(trials);
  }));

  out.push_back(Check("collusion tightness", [&](bool& ok) {
    PrivacyParams params = PaperTableParams(1e8);
    AttackConfig below;
    below.K = 2;
    below.M = 1;
    below.colluders = 1;
    below.seed = seed;
    AttackConfig above = below;
    above.K = 1;
    above.colluders = 2;
    double low = 1e300, high = 0.0;
    for (const auto& r : LeakageReport(10, params, below)) low = std::min(low, r.mse / r.input_var);
    for (const auto& r : LeakageReport(10, params, above)) high = std::max(high, r.mse / r.input_var);
    ok = low >= 0.5 && high <= 1e-8;
    return "min mse/var with M colluders " + FormatDouble(low) +
           ", max with M+1 " + FormatDouble(high);
  }));

  out.push_back(Check("mutual information oracle", [&](bool& ok) {
    Rng rng(DeriveSeed(seed, 5, 0));
    double worst = -1.0;
    for (int i = 0; i < 200; ++i) {
      const double c1 = rng.Uniform(0.0, 2.0), a = rng.Normal(), b = rng.Normal();
      const double s2 = std::pow(10.0, rng.Uniform(-3.0, 3.0));
      worst = std::max(worst, MiOracleScalar(c1, a, b, s2, 2000) -
                                  ScalarChannelBound(c1, a, b, s2));
    }
    ok = worst <= 1e-6;
    return "max excess over bound " + FormatDouble(worst);
  }));

  out.push_back(Check("training equivalence", [&](bool& ok) {
    BlobsSpec bs;
    bs.points = 64;
    bs.dim = 8;
    bs.seed = seed;
    const Dataset data = MakeBlobs(bs);
    const Model init = Model::Initialize(
        {8}, {LayerSpec::Dense(8, 6), LayerSpec::Relu(), LayerSpec::Dense(6, 2)}, seed);
    TrainConfig cfg;
    cfg.steps = 20;
    cfg.seed = seed;
    const auto plain = TrainPlaintext(init, cfg, data);
    ProtocolOptions opts;
    opts.session.seed = seed;
    const auto masked = TrainProtocol(init, cfg, data, nullptr, opts);
    double worst = 0.0;
    for (std::size_t s = 0; s < plain.trajectory.size(); ++s) {
      for (std::size_t l = 0; l < plain.trajectory[s].weights.size(); ++l) {
        worst = std::max(worst, RelError(masked.train.trajectory[s].weights[l],
                                         plain.trajectory[s].weights[l]));
      }
    }
    ok = worst < 1e-6 && OneEncodingViolations(masked.transcript) == 0;
    return "max trajectory rel " + FormatDouble(worst);
  }));

  return out;
}

}  // namespace vbmask
