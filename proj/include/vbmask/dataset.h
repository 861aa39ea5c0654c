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

#ifndef VBMASK_DATASET_H_
#define VBMASK_DATASET_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vbmask/tensor.h"

namespace vbmask {

struct Dataset {
  Shape sample_shape;
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return inputs.size(); }
  // Throws InvalidArgument if samples and labels disagree.
  void Validate() const;
};

// Seeded isotropic Gaussian blobs. Class c is centred at
// separation * sigma_class * e_c, so any two means are
// sqrt(2) * separation * sigma_class apart.
struct BlobsSpec {
  int classes = 2;
  std::size_t points = 200;
  std::size_t dim = 20;
  double separation = 4.0;
  double sigma_class = 1.0;
  std::uint64_t seed = 1;
};

Dataset MakeBlobs(const BlobsSpec& spec);

// CSV with header `label,f0,f1,...`; one sample per line.
Dataset LoadCsv(const std::string& path);
void WriteCsv(const std::string& path, const Dataset& data);

// IDX pair: images (magic 0x00000803, dims N,rows,cols, unsigned bytes) and
// labels (magic 0x00000801, dim N). Pixels are scaled to [0,1].
Dataset LoadIdx(const std::string& images_path, const std::string& labels_path,
                std::optional<std::size_t> limit = std::nullopt);

// Reinterprets every sample with a new shape of the same element count.
Dataset ReshapeSamples(Dataset data, const Shape& shape);

// Deterministic split; the first element is the training part.
std::pair<Dataset, Dataset> SplitDataset(const Dataset& data,
                                         double val_fraction,
                                         std::uint64_t seed);

}  // namespace vbmask

#endif  // VBMASK_DATASET_H_
