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

// vbmask command-line driver.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error,
// 3 integrity abort.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vbmask/attack.h"
#include "vbmask/config.h"
#include "vbmask/errors.h"
#include "vbmask/io.h"
#include "vbmask/privacy.h"
#include "vbmask/protocol.h"
#include "vbmask/rng.h"
#include "vbmask/selftest.h"
#include "vbmask/training.h"

namespace {

using namespace vbmask;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIntegrity = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string precision;
  std::optional<int> workers;
  bool paper_literal = false;
};

void AddCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "Override the configured seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--precision", f.precision, "Arithmetic precision")
      ->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_option("--workers", f.workers, "Number of simulated workers");
  cmd->add_flag("--paper-literal", f.paper_literal,
                "Send raw deltas and decode rows to gradient workers");
}

RunConfig Resolve(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? ParseConfig(json::object()) : LoadConfig(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (!f.precision.empty()) cfg.train.precision = ParsePrecision(f.precision);
  if (f.workers) cfg.workers.count = *f.workers;
  if (f.paper_literal) cfg.session.paper_literal = true;
  FinalizeConfig(cfg);
  return cfg;
}

std::string OutPath(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

void WriteRunJson(const RunConfig& cfg, const std::string& command) {
  std::filesystem::create_directories(cfg.output_dir);
  json j = ConfigToJson(cfg);
  j["command"] = command;
  WriteTextFile(OutPath(cfg, "run.json"), j.dump(2) + "\n");
}

json WeightsToJson(const Model& model) {
  json layers = json::array();
  for (const auto& l : model.layers()) {
    layers.push_back({{"kind", LayerKindName(l.spec.kind)},
                      {"weight", TensorToJson(l.weight)},
                      {"bias", TensorToJson(l.bias)}});
  }
  return {{"layers", layers}};
}

void LoadWeightsJson(Model& model, const std::string& path) {
  json j;
  try {
    j = json::parse(ReadTextFile(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  const auto& layers = j.at("layers");
  if (layers.size() != model.layers().size()) {
    throw ConfigError(path + ": layer count does not match the configured model");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& dst = model.layers()[l];
    Tensor w = TensorFromJson(layers[l].at("weight"));
    Tensor b = TensorFromJson(layers[l].at("bias"));
    if (w.shape() != dst.weight.shape() || b.shape() != dst.bias.shape()) {
      throw ConfigError(path + ": shape mismatch at layer " + std::to_string(l));
    }
    dst.weight = std::move(w);
    dst.bias = std::move(b);
  }
}

std::pair<Dataset, Dataset> Split(const RunConfig& cfg) {
  const Dataset data = LoadDataset(cfg.dataset);
  if (cfg.dataset.val_fraction == 0.0) return {data, Dataset{}};
  return SplitDataset(data, cfg.dataset.val_fraction, DeriveSeed(cfg.seed, 0x5350, 0));
}

int CmdTrain(const CommonFlags& f) {
  const RunConfig cfg = Resolve(f);
  WriteRunJson(cfg, "train");
  auto [train, val] = Split(cfg);
  const Model init = BuildModel(cfg, train);
  const Dataset* vp = val.size() > 0 ? &val : nullptr;
  const auto result = TrainProtocol(init, cfg.train, train, vp, BuildProtocolOptions(cfg));
  WriteTextFile(OutPath(cfg, "metrics.jsonl"), MetricsJsonl(result.train.epochs));
  WriteTextFile(OutPath(cfg, "transcript.jsonl"), result.transcript.ToJsonl());
  WriteTextFile(OutPath(cfg, "weights.json"), WeightsToJson(result.train.model).dump() + "\n");
  const auto& last = result.train.epochs.back();
  std::cout << "trained " << cfg.train.steps << " steps: loss " << FormatDouble(last.loss)
            << ", train_acc " << FormatDouble(last.train_acc) << ", val_acc "
            << FormatDouble(last.val_acc) << ", integrity failures "
            << result.integrity_failures << "\n";
  return kExitOk;
}

int CmdInfer(const CommonFlags& f, const std::string& weights) {
  const RunConfig cfg = Resolve(f);
  WriteRunJson(cfg, "infer");
  auto [train, val] = Split(cfg);
  const Dataset& data = val.size() > 0 ? val : train;
  Model model = BuildModel(cfg, train);
  if (!weights.empty()) LoadWeightsJson(model, weights);
  auto opts = BuildProtocolOptions(cfg);
  const auto result = InferProtocol(model, data.inputs, opts);
  std::vector<std::size_t> plain;
  std::size_t correct = 0;
  std::ostringstream csv;
  csv << "index,label,prediction,plaintext_prediction\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    plain.push_back(Argmax(ForwardPlain(model, data.inputs[i], cfg.train.precision).logits));
    correct += result.predictions[i] == static_cast<std::size_t>(data.labels[i]);
    csv << i << ',' << data.labels[i] << ',' << result.predictions[i] << ',' << plain[i]
        << '\n';
  }
  WriteTextFile(OutPath(cfg, "predictions.csv"), csv.str());
  WriteTextFile(OutPath(cfg, "transcript.jsonl"), result.transcript.ToJsonl());
  const double acc = data.size() ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
  std::cout << "inferred " << data.size() << " samples: accuracy " << FormatDouble(acc)
            << ", agreement with plaintext "
            << FormatDouble(ArgmaxAgreement(result.predictions, plain))
            << ", integrity failures " << result.integrity_failures << "\n";
  return kExitOk;
}

int CmdAnalyzePrivacy(const CommonFlags& f, bool bits) {
  const RunConfig cfg = Resolve(f);
  WriteRunJson(cfg, "analyze-privacy");
  std::vector<PrivacyParams> rows;
  std::vector<double> sigmas = cfg.privacy.sigma2_list;
  const bool table = cfg.privacy.preset == "paper-table";
  if (sigmas.empty()) {
    if (table) {
      for (const auto& r : PaperTableRows()) sigmas.push_back(r.sigma2);
    } else {
      sigmas.push_back(cfg.session.noise.variance);
    }
  }
  for (double s2 : sigmas) {
    PrivacyParams p;
    if (table) {
      p = PaperTableParams(s2);
    } else {
      p.K = cfg.session.K;
      p.M = cfg.session.M;
      p.sigma2 = s2;
      p.ratio_sq = cfg.privacy.alpha_ratio;
      p.var_sum = cfg.privacy.var_sum;
      p.c_min = cfg.privacy.c_min_bound;
    }
    p.c1 = cfg.privacy.c1;
    p.Validate();
    rows.push_back(p);
  }
  const std::string csv = PrivacyCsv(rows);
  WriteTextFile(OutPath(cfg, "privacy.csv"), csv);
  std::cout << csv;
  if (bits) {
    std::cout << "bound_single in bits:";
    for (const auto& p : rows) std::cout << ' ' << FormatDouble(MiBoundSingle(p) / std::log(2.0));
    std::cout << "\n";
  }
  if (table) {
    PrivacyParams reference = ReferenceParams(4e8);
    reference.ratio_sq = cfg.privacy.reference_alpha_ratio;
    reference.c1 = cfg.privacy.c1;
    std::cout << "note: the table's last row (5e-08 at sigma2=4e+08) corresponds to a"
              << " squared coefficient ratio of 20; the stated parameters (ratio "
              << FormatDouble(cfg.privacy.reference_alpha_ratio) << ") give "
              << FormatDouble(MiBoundSingle(reference)) << " at sigma2=4e+08\n";
  }
  return kExitOk;
}

int CmdAttackDemo(const CommonFlags& f) {
  const RunConfig cfg = Resolve(f);
  WriteRunJson(cfg, "attack-demo");
  std::vector<double> sigmas = cfg.attack.sigma2_list;
  if (sigmas.empty()) sigmas.push_back(cfg.session.noise.variance);
  std::vector<AttackTrial> all;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    AttackConfig ac;
    ac.K = cfg.session.K;
    ac.M = cfg.session.M;
    ac.colluders = cfg.attack.colluders;
    ac.sigma2 = sigmas[i];
    ac.noise_mean = cfg.session.noise.mean;
    ac.c_min = cfg.session.c_min;
    ac.dim = cfg.attack.dim;
    ac.knowledge = cfg.attack.knowledge;
    ac.seed = DeriveSeed(cfg.seed, 0x4154, i);
    PrivacyParams p;
    p.K = ac.K;
    p.M = ac.M;
    p.c1 = cfg.privacy.c1;
    p.sigma2 = ac.sigma2;
    p.var_sum = static_cast<double>(ac.dim) * static_cast<double>(ac.K);
    p.c_min = ac.c_min;
    const auto trials = LeakageReport(cfg.attack.trials, p, ac);
    double ratio = 0.0;
    for (const auto& t : trials) ratio += t.mse / t.input_var;
    ratio /= static_cast<double>(trials.size());
    std::cout << "sigma2 " << FormatDouble(ac.sigma2) << ", " << ac.colluders
              << " colluder(s), M=" << ac.M << ": mean mse/Var(x) " << FormatDouble(ratio)
              << "\n";
    all.insert(all.end(), trials.begin(), trials.end());
  }
  WriteTextFile(OutPath(cfg, "attack.csv"), AttackCsv(all));
  return kExitOk;
}

int CmdVerifyIntegrity(const CommonFlags& f, int batches) {
  if (batches < 1) throw ConfigError("--batches must be >= 1");
  const RunConfig cfg = Resolve(f);
  if (cfg.session.E < 1) throw ConfigError("verify-integrity needs privacy.E >= 1");
  WriteRunJson(cfg, "verify-integrity");
  auto [train, val] = Split(cfg);
  const Model model = BuildModel(cfg, train);
  std::size_t layer = 0;
  while (layer < model.layers().size() && !model.layers()[layer].spec.bilinear()) ++layer;
  if (layer == model.layers().size()) throw ConfigError("model has no linear layer");

  Session session(cfg.session, BuildWorkers(cfg));
  std::vector<LayerSpec> specs;
  std::vector<Tensor> weights;
  for (const auto& l : model.layers()) {
    specs.push_back(l.spec);
    weights.push_back(l.weight);
  }
  session.LoadWeights(specs, weights);
  Rng rng(DeriveSeed(cfg.seed, 0x5649, 0));
  const auto K = static_cast<std::size_t>(cfg.session.K);
  std::string verdicts;
  int flagged = 0;
  for (int b = 0; b < batches; ++b) {
    session.BeginVirtualBatch();
    std::vector<Tensor> xs, deltas;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& x = train.inputs[rng.Index(train.size())];
      // Inputs reach the first linear layer unchanged apart from reshapes.
      xs.push_back(x.Reshaped(model.shape_at(layer)));
    }
    const auto fwd = session.Forward(layer, xs);
    for (const auto& y : fwd.outputs) deltas.push_back(rng.NormalTensor(y.shape(), 0.0, 1.0));
    const auto grad = session.WeightGrad(layer, deltas);
    const bool ok = fwd.verdict.passed && grad.verdict.passed;
    flagged += !ok;
    ordered_json j;
    j["batch"] = b;
    j["forward_passed"] = fwd.verdict.passed;
    j["forward_residual"] = fwd.verdict.max_residual;
    j["grad_passed"] = grad.verdict.passed;
    j["grad_residual"] = grad.verdict.max_residual;
    verdicts += j.dump() + "\n";
  }
  WriteTextFile(OutPath(cfg, "verdicts.jsonl"), verdicts);
  WriteTextFile(OutPath(cfg, "transcript.jsonl"), session.transcript().ToJsonl());
  std::cout << flagged << "/" << batches << " virtual batches flagged (tau "
            << FormatDouble(cfg.session.tau) << ")\n";
  if (flagged > 0 && cfg.policy == IntegrityPolicy::kAbort) {
    std::cerr << "integrity abort: " << flagged << " batch(es) failed verification\n";
    return kExitIntegrity;
  }
  return kExitOk;
}

int CmdSelftest(const CommonFlags& f) {
  const std::uint64_t seed = f.seed.value_or(1);
  int failed = 0;
  for (const auto& item : RunSelftest(seed)) {
    std::cout << (item.passed ? "PASS " : "FAIL ") << item.name << ": " << item.detail
              << "\n";
    failed += !item.passed;
  }
  std::cout << (failed ? std::to_string(failed) + " check(s) failed" : "all checks passed")
            << "\n";
  return failed ? kExitFailure : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vbmask: masked offloading of linear layers to untrusted workers"};
  app.require_subcommand(1);

  CommonFlags train_f, infer_f, priv_f, attack_f, verify_f, self_f;
  std::string weights;
  bool bits = false;
  int batches = 100;

  auto* train = app.add_subcommand("train", "Train a model through the masked protocol");
  AddCommon(train, train_f);
  auto* infer = app.add_subcommand("infer", "Masked inference over the validation split");
  AddCommon(infer, infer_f);
  infer->add_option("--weights", weights, "weights.json written by train");
  auto* priv = app.add_subcommand("analyze-privacy", "Evaluate mutual-information bounds");
  AddCommon(priv, priv_f);
  priv->add_flag("--bits", bits, "Also print the single-input bound in bits");
  auto* attack = app.add_subcommand("attack-demo", "Colluding-worker reconstruction attack");
  AddCommon(attack, attack_f);
  auto* verify = app.add_subcommand("verify-integrity", "Run integrity checks on one layer");
  AddCommon(verify, verify_f);
  verify->add_option("--batches", batches, "Virtual batches to verify");
  auto* self = app.add_subcommand("selftest", "Run the built-in invariant checks");
  AddCommon(self, self_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e) == 0) return kExitOk;  // --help
    std::cerr << app.help();
    return kExitConfig;
  }

  try {
    if (*train) return CmdTrain(train_f);
    if (*infer) return CmdInfer(infer_f, weights);
    if (*priv) return CmdAnalyzePrivacy(priv_f, bits);
    if (*attack) return CmdAttackDemo(attack_f);
    if (*verify) return CmdVerifyIntegrity(verify_f, batches);
    if (*self) return CmdSelftest(self_f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IntegrityAbort& e) {
    std::cerr << "integrity abort: " << e.what() << "\n";
    return kExitIntegrity;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
