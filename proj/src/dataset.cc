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

#include "vbmask/dataset.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vbmask/errors.h"
#include "vbmask/io.h"
#include "vbmask/rng.h"

namespace vbmask {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::string Hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08X", v);
  return buf;
}

class ByteReader {
 public:
  ByteReader(const std::string& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path);
    bytes_.assign(std::istreambuf_iterator<char>(in), {});
  }

  std::uint32_t BigEndian32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + i]);
    }
    pos_ += 4;
    return v;
  }

  std::uint8_t Byte() {
    Need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  std::size_t offset() const { return pos_; }
  const std::string& path() const { return path_; }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw IngestionError(path_ + ": truncated at byte offset " +
                           std::to_string(pos_));
    }
  }

  std::string path_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

void ExpectMagic(ByteReader& r, std::uint32_t expected) {
  std::uint32_t magic = r.BigEndian32();
  if (magic != expected) {
    throw IngestionError(r.path() + ": bad IDX magic " + Hex32(magic) +
                         " at byte offset 0, expected " + Hex32(expected));
  }
}

double ParseDouble(const std::string& field, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw IngestionError("csv line " + std::to_string(line) +
                         ": not a number: '" + field + "'");
  }
  return v;
}

std::vector<std::string> SplitCommas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void Dataset::Validate() const {
  if (inputs.size() != labels.size()) {
    throw InvalidArgument("dataset has " + std::to_string(inputs.size()) +
                          " samples but " + std::to_string(labels.size()) +
                          " labels");
  }
  for (const auto& x : inputs) RequireShape(x, sample_shape, "dataset sample");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw InvalidArgument("label " + std::to_string(y) + " outside [0," +
                            std::to_string(num_classes) + ")");
    }
  }
}

Dataset MakeBlobs(const BlobsSpec& spec) {
  if (spec.classes < 2 || spec.dim < static_cast<std::size_t>(spec.classes) ||
      spec.points == 0 || spec.sigma_class <= 0.0) {
    throw InvalidArgument("blobs need classes >= 2, dim >= classes, points > 0");
  }
  Rng rng(spec.seed);
  Dataset data;
  data.sample_shape = {spec.dim};
  data.num_classes = spec.classes;
  for (std::size_t n = 0; n < spec.points; ++n) {
    int label = static_cast<int>(n % static_cast<std::size_t>(spec.classes));
    Tensor x = rng.NormalTensor(data.sample_shape, 0.0, spec.sigma_class);
    x[static_cast<std::size_t>(label)] += spec.separation * spec.sigma_class;
    data.inputs.push_back(std::move(x));
    data.labels.push_back(label);
  }
  return data;
}

Dataset LoadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(path + ": empty file");
  auto header = SplitCommas(line);
  if (header.size() < 2 || header[0] != "label") {
    throw IngestionError(path + ": header must be label,f0,f1,...");
  }
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i] != "f" + std::to_string(i - 1)) {
      throw IngestionError(path + ": header column " + std::to_string(i) +
                           " must be f" + std::to_string(i - 1));
    }
  }
  Dataset data;
  data.sample_shape = {header.size() - 1};
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = SplitCommas(line);
    if (fields.size() != header.size()) {
      throw IngestionError(path + ": line " + std::to_string(lineno) + " has " +
                           std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(header.size()));
    }
    double label = ParseDouble(fields[0], lineno);
    if (label < 0 || label != static_cast<int>(label)) {
      throw IngestionError(path + ": line " + std::to_string(lineno) +
                           ": label must be a non-negative integer");
    }
    std::vector<double> values;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      values.push_back(ParseDouble(fields[i], lineno));
    }
    data.labels.push_back(static_cast<int>(label));
    data.inputs.emplace_back(data.sample_shape, std::move(values));
  }
  data.num_classes =
      data.labels.empty()
          ? 0
          : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  return data;
}

void WriteCsv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  const std::size_t features = NumElements(data.sample_shape);
  out << "label";
  for (std::size_t i = 0; i < features; ++i) out << ",f" << i;
  out << '\n';
  for (std::size_t n = 0; n < data.size(); ++n) {
    out << data.labels[n];
    for (double v : data.inputs[n].values()) out << ',' << FormatDouble(v);
    out << '\n';
  }
}

Dataset LoadIdx(const std::string& images_path, const std::string& labels_path,
                std::optional<std::size_t> limit) {
  ByteReader images(images_path);
  ExpectMagic(images, kIdxImagesMagic);
  const std::size_t count = images.BigEndian32();
  const std::size_t rows = images.BigEndian32();
  const std::size_t cols = images.BigEndian32();
  if (rows == 0 || cols == 0) {
    throw IngestionError(images_path + ": zero image dimension at byte offset " +
                         std::to_string(images.offset() - 4));
  }
  ByteReader labels(labels_path);
  ExpectMagic(labels, kIdxLabelsMagic);
  const std::size_t label_count = labels.BigEndian32();
  if (label_count != count) {
    throw IngestionError(labels_path + ": " + std::to_string(label_count) +
                         " labels for " + std::to_string(count) +
                         " images (byte offset 4)");
  }
  const std::size_t n = limit ? std::min(*limit, count) : count;
  Dataset data;
  data.sample_shape = {1, rows, cols};
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x(data.sample_shape);
    for (auto& v : x.data()) v = images.Byte() / 255.0;
    data.inputs.push_back(std::move(x));
    data.labels.push_back(labels.Byte());
  }
  data.num_classes =
      data.labels.empty()
          ? 0
          : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  return data;
}

Dataset ReshapeSamples(Dataset data, const Shape& shape) {
  for (auto& x : data.inputs) x = x.Reshaped(shape);
  data.sample_shape = shape;
  return data;
}

std::pair<Dataset, Dataset> SplitDataset(const Dataset& data,
                                         double val_fraction,
                                         std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw InvalidArgument("val_fraction must be in [0,1)");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), Rng(seed).engine());
  const auto n_val = static_cast<std::size_t>(val_fraction * data.size());
  Dataset train, val;
  train.sample_shape = val.sample_shape = data.sample_shape;
  train.num_classes = val.num_classes = data.num_classes;
  for (std::size_t i = 0; i < order.size(); ++i) {
    Dataset& dst = i < n_val ? val : train;
    dst.inputs.push_back(data.inputs[order[i]]);
    dst.labels.push_back(data.labels[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

}  // namespace vbmask
