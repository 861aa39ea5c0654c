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

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "vbmask/errors.h"

namespace vbmask {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vbmask_ds_" + std::string(::testing::UnitTest::GetInstance()
                                           ->current_test_info()
                                           ->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  void WriteBytes(const std::string& name, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(Path(name), std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }

  fs::path dir_;
};

std::vector<std::uint8_t> Be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

std::vector<std::uint8_t> Cat(std::initializer_list<std::vector<std::uint8_t>> parts) {
  std::vector<std::uint8_t> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

TEST(Blobs, SeparatedClassMeans) {
  BlobsSpec spec;
  spec.points = 200;
  spec.seed = 1;
  const Dataset d = MakeBlobs(spec);
  ASSERT_EQ(d.size(), 200u);
  EXPECT_EQ(d.num_classes, 2);
  // Construction means: separation * sigma on the class's own axis.
  const double dist = std::sqrt(2.0) * spec.separation * spec.sigma_class;
  EXPECT_GE(dist, 4.0 * spec.sigma_class);
  Tensor m0({spec.dim}), m1({spec.dim});
  for (std::size_t i = 0; i < d.size(); ++i) (d.labels[i] ? m1 : m0) += d.inputs[i];
  m0 *= 1.0 / 100;
  m1 *= 1.0 / 100;
  EXPECT_NEAR((m0 - m1).Norm2(), dist, 0.6);
}

TEST(Blobs, Deterministic) {
  BlobsSpec spec;
  EXPECT_EQ(MakeBlobs(spec).inputs, MakeBlobs(spec).inputs);
  spec.classes = 1;
  EXPECT_THROW(MakeBlobs(spec), InvalidArgument);
}

TEST_F(TempDir, CsvRoundTrip) {
  BlobsSpec spec;
  spec.points = 30;
  spec.dim = 5;
  spec.classes = 3;
  const Dataset d = MakeBlobs(spec);
  WriteCsv(Path("d.csv"), d);
  const Dataset r = LoadCsv(Path("d.csv"));
  EXPECT_EQ(r.inputs, d.inputs);
  EXPECT_EQ(r.labels, d.labels);
  EXPECT_EQ(r.sample_shape, d.sample_shape);
}

TEST_F(TempDir, CsvRejectsMalformed) {
  {
    std::ofstream out(Path("bad.csv"));
    out << "y,f0\n1,2\n";
  }
  EXPECT_THROW(LoadCsv(Path("bad.csv")), IngestionError);
  {
    std::ofstream out(Path("short.csv"));
    out << "label,f0,f1\n1,2\n";
  }
  EXPECT_THROW(LoadCsv(Path("short.csv")), IngestionError);
  {
    std::ofstream out(Path("nan.csv"));
    out << "label,f0\n1,abc\n";
  }
  EXPECT_THROW(LoadCsv(Path("nan.csv")), IngestionError);
  EXPECT_THROW(LoadCsv(Path("missing.csv")), IngestionError);
}

TEST_F(TempDir, IdxLoadsAndScales) {
  WriteBytes("img", Cat({Be32(0x803), Be32(2), Be32(2), Be32(2), {0, 255, 51, 102, 1, 2, 3, 4}}));
  WriteBytes("lbl", Cat({Be32(0x801), Be32(2), {7, 3}}));
  const Dataset d = LoadIdx(Path("img"), Path("lbl"));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.sample_shape, (Shape{1, 2, 2}));
  EXPECT_EQ(d.inputs[0], Tensor({1, 2, 2}, {0.0, 1.0, 0.2, 0.4}));
  EXPECT_EQ(d.labels, (std::vector<int>{7, 3}));
  EXPECT_EQ(d.num_classes, 8);
  EXPECT_EQ(LoadIdx(Path("img"), Path("lbl"), 1).size(), 1u);
}

TEST_F(TempDir, IdxWrongMagicNamesExpected) {
  WriteBytes("img", Cat({Be32(0x801), Be32(1), Be32(1), Be32(1), {0}}));
  WriteBytes("lbl", Cat({Be32(0x801), Be32(1), {0}}));
  try {
    LoadIdx(Path("img"), Path("lbl"));
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("0x00000803"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos) << e.what();
  }
}

TEST_F(TempDir, IdxTruncatedReportsOffset) {
  WriteBytes("img", Cat({Be32(0x803), Be32(2), Be32(2), Be32(2), {1, 2, 3}}));
  WriteBytes("lbl", Cat({Be32(0x801), Be32(2), {0, 1}}));
  try {
    LoadIdx(Path("img"), Path("lbl"));
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset 19"), std::string::npos) << e.what();
  }
}

TEST_F(TempDir, IdxLabelCountMismatch) {
  WriteBytes("img", Cat({Be32(0x803), Be32(2), Be32(1), Be32(1), {1, 2}}));
  WriteBytes("lbl", Cat({Be32(0x801), Be32(3), {0, 1, 1}}));
  EXPECT_THROW(LoadIdx(Path("img"), Path("lbl")), IngestionError);
}

TEST(Split, DisjointAndDeterministic) {
  const Dataset d = MakeBlobs(BlobsSpec{});
  const auto [a, b] = SplitDataset(d, 0.25, 3);
  EXPECT_EQ(a.size() + b.size(), d.size());
  EXPECT_EQ(b.size(), 50u);
  const auto [c, e] = SplitDataset(d, 0.25, 3);
  EXPECT_EQ(b.inputs, e.inputs);
  EXPECT_THROW(SplitDataset(d, 1.0, 3), InvalidArgument);
}

TEST(Reshape, KeepsValues) {
  BlobsSpec spec;
  spec.dim = 16;
  const Dataset d = MakeBlobs(spec);
  const Dataset r = ReshapeSamples(d, {1, 4, 4});
  EXPECT_EQ(r.sample_shape, (Shape{1, 4, 4}));
  EXPECT_EQ(r.inputs[3].values(), d.inputs[3].values());
  EXPECT_THROW(ReshapeSamples(d, {3, 5}), InvalidArgument);
}

}  // namespace
}  // namespace vbmask
