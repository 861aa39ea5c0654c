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

#include "vbmask/config.h"

#include <algorithm>
#include <set>
#include <type_traits>

#include "vbmask/errors.h"
#include "vbmask/io.h"

namespace vbmask {
namespace {

using nlohmann::json;

// Typed, key-checked access to one JSON object.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be a JSON object");
  }

  bool Has(const char* key) const { return j_.contains(key); }

  const json& Raw(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void Get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    const json& v = j_.at(key);
    const std::string where = name_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + " must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + " must be a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + " must be a number");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(where + " must be a non-negative integer");
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

  template <typename T>
  void GetList(const char* key, std::vector<T>& out) {
    if (!j_.contains(key)) return;
    const json& v = Raw(key);
    if (!v.is_array()) throw ConfigError(name_ + "." + key + " must be an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      json wrapper = {{"item", v[i]}};
      Section s(wrapper, name_ + "." + key + "[" + std::to_string(i) + "]");
      T item{};
      s.Get("item", item);
      out.push_back(item);
    }
  }

  void Done() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown key " + name_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

LayerSpec ParseLayer(const json& j, const std::string& where) {
  Section s(j, where);
  std::string kind;
  s.Get("kind", kind);
  if (kind.empty()) throw ConfigError(where + ".kind is required");
  LayerSpec spec;
  try {
    spec.kind = ParseLayerKind(kind);
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  switch (spec.kind) {
    case LayerKind::kDense:
      s.Get("in", spec.in_features);
      s.Get("out", spec.out_features);
      if (spec.in_features == 0 || spec.out_features == 0) {
        throw ConfigError(where + ": dense needs positive in and out");
      }
      break;
    case LayerKind::kConv2d:
      s.Get("in_channels", spec.in_channels);
      s.Get("out_channels", spec.out_channels);
      s.Get("kernel", spec.kernel);
      s.Get("stride", spec.stride);
      s.Get("padding", spec.padding);
      if (spec.in_channels == 0 || spec.out_channels == 0 || spec.kernel == 0 ||
          spec.stride == 0) {
        throw ConfigError(where + ": conv2d needs positive channels, kernel, stride");
      }
      break;
    case LayerKind::kMaxPool:
      s.Get("window", spec.window);
      if (spec.window == 0) throw ConfigError(where + ": maxpool needs window >= 1");
      break;
    case LayerKind::kRelu:
    case LayerKind::kFlatten:
      break;
  }
  s.Done();
  return spec;
}

json LayerToJson(const LayerSpec& l) {
  json j = {{"kind", LayerKindName(l.kind)}};
  switch (l.kind) {
    case LayerKind::kDense:
      j["in"] = l.in_features;
      j["out"] = l.out_features;
      break;
    case LayerKind::kConv2d:
      j["in_channels"] = l.in_channels;
      j["out_channels"] = l.out_channels;
      j["kernel"] = l.kernel;
      j["stride"] = l.stride;
      j["padding"] = l.padding;
      break;
    case LayerKind::kMaxPool:
      j["window"] = l.window;
      break;
    default:
      break;
  }
  return j;
}

template <typename F>
auto Wrap(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void ParseModel(Section s, RunConfig& c) {
  s.GetList("input_shape", c.input_shape);
  s.Get("hidden", c.hidden);
  if (s.Has("layers")) {
    const json& arr = s.Raw("layers");
    if (!arr.is_array()) throw ConfigError("model.layers must be an array");
    c.layers.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      c.layers.push_back(ParseLayer(arr[i], "model.layers[" + std::to_string(i) + "]"));
    }
  }
  s.Done();
}

void ParseTrain(Section s, RunConfig& c) {
  s.Get("learning_rate", c.train.learning_rate);
  s.Get("batch_size", c.train.batch_size);
  s.Get("steps", c.train.steps);
  s.Get("log_every", c.train.log_every);
  std::string precision = PrecisionName(c.train.precision);
  s.Get("precision", precision);
  c.train.precision = Wrap("train.precision", [&] { return ParsePrecision(precision); });
  std::string policy = IntegrityPolicyName(c.policy);
  s.Get("integrity_policy", policy);
  c.policy = Wrap("train.integrity_policy", [&] { return ParseIntegrityPolicy(policy); });
  s.Get("max_retries", c.max_retries);
  s.Get("record_timing", c.record_timing);
  s.Done();
}

void ParseAttack(Section s, AttackSection& a) {
  s.Get("colluders", a.colluders);
  s.Get("trials", a.trials);
  s.Get("dim", a.dim);
  std::string knowledge = KnowledgeName(a.knowledge);
  s.Get("knowledge", knowledge);
  a.knowledge = Wrap("privacy.attack.knowledge", [&] { return ParseKnowledge(knowledge); });
  s.GetList("sigma2_list", a.sigma2_list);
  s.Done();
}

void ParsePrivacy(Section s, RunConfig& c) {
  auto& sc = c.session;
  s.Get("K", sc.K);
  s.Get("M", sc.M);
  s.Get("E", sc.E);
  s.Get("sigma2", sc.noise.variance);
  s.Get("noise_mean", sc.noise.mean);
  s.Get("tau", sc.tau);
  s.Get("c_min", sc.c_min);
  s.Get("paper_literal", sc.paper_literal);
  s.Get("offload_input_grad", sc.offload_input_grad);
  s.Get("identity_scheme", sc.identity_scheme);
  auto& p = c.privacy;
  s.Get("preset", p.preset);
  s.Get("C1", p.c1);
  s.GetList("sigma2_list", p.sigma2_list);
  s.Get("alpha_ratio", p.alpha_ratio);
  s.Get("reference_alpha_ratio", p.reference_alpha_ratio);
  s.Get("var_sum", p.var_sum);
  s.Get("C_min", p.c_min_bound);
  if (s.Has("attack")) ParseAttack(Section(s.Raw("attack"), "privacy.attack"), c.attack);
  s.Done();
}

void ParseWorkers(Section s, RunConfig& c) {
  s.Get("count", c.workers.count);
  s.Get("permute", c.session.permute_assignment);
  if (s.Has("profiles")) {
    const json& arr = s.Raw("profiles");
    if (!arr.is_array()) throw ConfigError("workers.profiles must be an array");
    c.workers.overrides.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "workers.profiles[" + std::to_string(i) + "]";
      Section w(arr[i], where);
      WorkerProfile p;
      p.worker_id = -1;
      w.Get("id", p.worker_id);
      if (p.worker_id < 0) throw ConfigError(where + ".id is required");
      std::string behavior = "honest";
      w.Get("behavior", behavior);
      p.behavior = Wrap(where, [&] { return ParseBehavior(behavior); });
      w.Get("perturbation_scale", p.perturbation_scale);
      w.Get("fault_probability", p.fault_probability);
      w.Get("group", p.group_id);
      w.Done();
      Wrap(where, [&] {
        p.Validate();
        return 0;
      });
      c.workers.overrides.push_back(p);
    }
  }
  s.Done();
}

void ParseDataset(Section s, RunConfig& c) {
  auto& d = c.dataset;
  s.Get("kind", d.kind);
  s.Get("classes", d.blobs.classes);
  s.Get("points", d.blobs.points);
  s.Get("dim", d.blobs.dim);
  s.Get("separation", d.blobs.separation);
  s.Get("sigma_class", d.blobs.sigma_class);
  s.Get("seed", d.blobs.seed);
  s.Get("path", d.path);
  s.Get("images", d.images);
  s.Get("labels", d.labels);
  if (s.Has("limit")) {
    std::size_t limit = 0;
    s.Get("limit", limit);
    d.limit = limit;
  }
  s.Get("val_fraction", d.val_fraction);
  s.GetList("reshape", d.reshape);
  s.Done();
}

}  // namespace

RunConfig ParseConfig(const json& j) {
  RunConfig c;
  Section top(j, "config");
  top.Get("seed", c.seed);
  if (top.Has("model")) ParseModel(Section(top.Raw("model"), "model"), c);
  if (top.Has("train")) ParseTrain(Section(top.Raw("train"), "train"), c);
  if (top.Has("privacy")) ParsePrivacy(Section(top.Raw("privacy"), "privacy"), c);
  if (top.Has("workers")) ParseWorkers(Section(top.Raw("workers"), "workers"), c);
  if (top.Has("dataset")) ParseDataset(Section(top.Raw("dataset"), "dataset"), c);
  if (top.Has("output")) {
    Section out(top.Raw("output"), "output");
    out.Get("dir", c.output_dir);
    out.Done();
  }
  top.Done();
  FinalizeConfig(c);
  return c;
}

RunConfig LoadConfig(const std::string& path) {
  std::string text;
  try {
    text = ReadTextFile(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return ParseConfig(j);
}

void FinalizeConfig(RunConfig& c) {
  c.train.virtual_batch = static_cast<std::size_t>(std::max(c.session.K, 0));
  c.train.seed = c.seed;
  c.session.seed = c.seed;
  c.session.precision = c.train.precision;
  Wrap("privacy", [&] {
    c.session.Validate();
    return 0;
  });
  Wrap("train", [&] {
    c.train.Validate();
    return 0;
  });
  if (c.max_retries < 0) throw ConfigError("train.max_retries must be >= 0");
  if (!(c.privacy.c1 >= 0.0)) throw ConfigError("privacy.C1 must be >= 0");
  if (c.privacy.preset != "paper-table" && c.privacy.preset != "direct") {
    throw ConfigError("privacy.preset must be paper-table or direct");
  }
  for (double s2 : c.privacy.sigma2_list) {
    if (!(s2 > 0.0)) throw ConfigError("privacy.sigma2_list entries must be > 0");
  }
  if (c.attack.colluders < 0 || c.attack.colluders > c.session.P()) {
    throw ConfigError("privacy.attack.colluders must lie in [0, K + M]");
  }
  if (c.attack.trials < 1) throw ConfigError("privacy.attack.trials must be >= 1");
  const int needed = c.session.RequiredWorkers();
  if (c.workers.count == 0) c.workers.count = needed;
  if (c.workers.count < needed) {
    throw ConfigError("workers.count " + std::to_string(c.workers.count) +
                      " is below the " + std::to_string(needed) +
                      " workers K, M and E require");
  }
  for (const auto& p : c.workers.overrides) {
    if (p.worker_id >= c.workers.count) {
      throw ConfigError("workers.profiles id " + std::to_string(p.worker_id) +
                        " out of range");
    }
  }
  const auto& d = c.dataset;
  if (d.kind != "synthetic-blobs" && d.kind != "csv" && d.kind != "idx") {
    throw ConfigError("dataset.kind must be synthetic-blobs, csv or idx");
  }
  if (d.kind == "csv" && d.path.empty()) throw ConfigError("dataset.path is required for csv");
  if (d.kind == "idx" && (d.images.empty() || d.labels.empty())) {
    throw ConfigError("dataset.images and dataset.labels are required for idx");
  }
  if (!(d.val_fraction >= 0.0 && d.val_fraction < 1.0)) {
    throw ConfigError("dataset.val_fraction must lie in [0, 1)");
  }
  if (d.blobs.classes < 2) throw ConfigError("dataset.classes must be >= 2");
}

json ConfigToJson(const RunConfig& c) {
  json layers = json::array();
  for (const auto& l : c.layers) layers.push_back(LayerToJson(l));
  json profiles = json::array();
  for (const auto& p : c.workers.overrides) {
    profiles.push_back({{"id", p.worker_id},
                        {"behavior", BehaviorName(p.behavior)},
                        {"perturbation_scale", p.perturbation_scale},
                        {"fault_probability", p.fault_probability},
                        {"group", p.group_id}});
  }
  json dataset = {{"kind", c.dataset.kind},
                  {"classes", c.dataset.blobs.classes},
                  {"points", c.dataset.blobs.points},
                  {"dim", c.dataset.blobs.dim},
                  {"separation", c.dataset.blobs.separation},
                  {"sigma_class", c.dataset.blobs.sigma_class},
                  {"seed", c.dataset.blobs.seed},
                  {"val_fraction", c.dataset.val_fraction},
                  {"reshape", c.dataset.reshape}};
  if (!c.dataset.path.empty()) dataset["path"] = c.dataset.path;
  if (!c.dataset.images.empty()) dataset["images"] = c.dataset.images;
  if (!c.dataset.labels.empty()) dataset["labels"] = c.dataset.labels;
  if (c.dataset.limit) dataset["limit"] = *c.dataset.limit;
  return {
      {"seed", c.seed},
      {"model", {{"input_shape", c.input_shape}, {"hidden", c.hidden}, {"layers", layers}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"steps", c.train.steps},
        {"log_every", c.train.log_every},
        {"precision", PrecisionName(c.train.precision)},
        {"integrity_policy", IntegrityPolicyName(c.policy)},
        {"max_retries", c.max_retries},
        {"record_timing", c.record_timing}}},
      {"privacy",
       {{"K", c.session.K},
        {"M", c.session.M},
        {"E", c.session.E},
        {"sigma2", c.session.noise.variance},
        {"noise_mean", c.session.noise.mean},
        {"tau", c.session.tau},
        {"c_min", c.session.c_min},
        {"paper_literal", c.session.paper_literal},
        {"offload_input_grad", c.session.offload_input_grad},
        {"identity_scheme", c.session.identity_scheme},
        {"preset", c.privacy.preset},
        {"C1", c.privacy.c1},
        {"sigma2_list", c.privacy.sigma2_list},
        {"alpha_ratio", c.privacy.alpha_ratio},
        {"reference_alpha_ratio", c.privacy.reference_alpha_ratio},
        {"var_sum", c.privacy.var_sum},
        {"C_min", c.privacy.c_min_bound},
        {"attack",
         {{"colluders", c.attack.colluders},
          {"trials", c.attack.trials},
          {"dim", c.attack.dim},
          {"knowledge", KnowledgeName(c.attack.knowledge)},
          {"sigma2_list", c.attack.sigma2_list}}}}},
      {"workers",
       {{"count", c.workers.count},
        {"permute", c.session.permute_assignment},
        {"profiles", profiles}}},
      {"dataset", dataset},
      {"output", {{"dir", c.output_dir}}}};
}

Dataset LoadDataset(const DatasetConfig& spec) {
  Dataset data;
  if (spec.kind == "synthetic-blobs") {
    data = MakeBlobs(spec.blobs);
  } else if (spec.kind == "csv") {
    data = LoadCsv(spec.path);
  } else if (spec.kind == "idx") {
    data = LoadIdx(spec.images, spec.labels, spec.limit);
  } else {
    throw ConfigError("unknown dataset kind '" + spec.kind + "'");
  }
  if (!spec.reshape.empty()) data = ReshapeSamples(std::move(data), spec.reshape);
  return data;
}

Model BuildModel(const RunConfig& cfg, const Dataset& data) {
  const Shape input = cfg.input_shape.empty() ? data.sample_shape : cfg.input_shape;
  std::vector<LayerSpec> layers = cfg.layers;
  if (layers.empty()) {
    if (input.size() > 1) layers.push_back(LayerSpec::Flatten());
    layers.push_back(LayerSpec::Dense(NumElements(input), cfg.hidden));
    layers.push_back(LayerSpec::Relu());
    layers.push_back(LayerSpec::Dense(cfg.hidden,
                                      static_cast<std::size_t>(data.num_classes)));
  }
  return Wrap("model", [&] { return Model::Initialize(input, layers, cfg.seed); });
}

std::vector<WorkerProfile> BuildWorkers(const RunConfig& cfg) {
  auto workers = HonestWorkers(cfg.workers.count);
  for (const auto& p : cfg.workers.overrides) {
    workers[static_cast<std::size_t>(p.worker_id)] = p;
  }
  return workers;
}

ProtocolOptions BuildProtocolOptions(const RunConfig& cfg) {
  ProtocolOptions o;
  o.session = cfg.session;
  o.workers = BuildWorkers(cfg);
  o.policy = cfg.policy;
  o.max_retries = cfg.max_retries;
  o.record_timing = cfg.record_timing;
  return o;
}

}  // namespace vbmask
