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

// Run configuration: one JSON document with the sections model, train,
// privacy, workers, dataset and output, plus a top-level seed. Every key is
// optional; unknown keys are rejected so typos never silently fall back to
// defaults.

#ifndef VBMASK_CONFIG_H_
#define VBMASK_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vbmask/attack.h"
#include "vbmask/dataset.h"
#include "vbmask/layers.h"
#include "vbmask/model.h"
#include "vbmask/privacy.h"
#include "vbmask/protocol.h"
#include "vbmask/training.h"

namespace vbmask {

struct DatasetConfig {
  std::string kind = "synthetic-blobs";  // synthetic-blobs | csv | idx
  BlobsSpec blobs;
  std::string path;    // csv
  std::string images;  // idx
  std::string labels;  // idx
  std::optional<std::size_t> limit;
  double val_fraction = 0.2;
  Shape reshape;  // optional per-sample reshape
};

struct PrivacyConfig {
  std::string preset = "paper-table";  // paper-table | direct
  double c1 = 1.0;
  std::vector<double> sigma2_list;  // empty: the preset's rows
  double alpha_ratio = 20.0;        // squared ratio, direct mode
  double var_sum = 2.0;
  double c_min_bound = 1.0;
  double reference_alpha_ratio = 10.0;
};

struct AttackSection {
  int colluders = 1;
  int trials = 10;
  std::size_t dim = 16;
  Knowledge knowledge = Knowledge::kCoefficientsKnown;
  std::vector<double> sigma2_list;  // empty: privacy noise variance only
};

struct WorkersConfig {
  int count = 0;  // 0: the minimum the scheme needs
  std::vector<WorkerProfile> overrides;
};

struct RunConfig {
  std::uint64_t seed = 1;
  Shape input_shape;                // empty: derived from the dataset
  std::vector<LayerSpec> layers;    // empty: dense-relu-dense MLP
  std::size_t hidden = 16;          // width of the default MLP
  TrainConfig train;
  IntegrityPolicy policy = IntegrityPolicy::kAbort;
  int max_retries = 3;
  bool record_timing = false;
  SessionConfig session;
  PrivacyConfig privacy;
  AttackSection attack;
  WorkersConfig workers;
  DatasetConfig dataset;
  std::string output_dir = "out";
};

// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig ParseConfig(const nlohmann::json& j);
RunConfig LoadConfig(const std::string& path);

// Resolved configuration, suitable for run.json and exact replay.
nlohmann::json ConfigToJson(const RunConfig& cfg);

// Propagates the top-level seed and checks cross-section constraints.
void FinalizeConfig(RunConfig& cfg);

Dataset LoadDataset(const DatasetConfig& spec);

// Input shape and layers, with defaults filled in from the dataset.
Model BuildModel(const RunConfig& cfg, const Dataset& data);

// Honest workers with per-id overrides applied.
std::vector<WorkerProfile> BuildWorkers(const RunConfig& cfg);

ProtocolOptions BuildProtocolOptions(const RunConfig& cfg);

}  // namespace vbmask

#endif  // VBMASK_CONFIG_H_
