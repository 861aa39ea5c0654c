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

#include "vbmask/tensor.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include "vbmask/errors.h"

namespace vbmask {

std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Precision ParsePrecision(const std::string& name) {
  if (name == "f64") return Precision::kF64;
  if (name == "f32") return Precision::kF32;
  throw InvalidArgument("unknown precision '" + name + "' (expected f32|f64)");
}

std::string PrecisionName(Precision p) {
  return p == Precision::kF32 ? "f32" : "f64";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(NumElements(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) throw InvalidArgument("tensor dimensions must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw InvalidArgument("tensor dimensions must be positive");
  }
  if (NumElements(shape_) != data_.size()) {
    throw InvalidArgument("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + ShapeToString(shape_));
  }
}

Tensor::Tensor(Shape shape, std::initializer_list<double> data)
    : Tensor(std::move(shape), std::vector<double>(data)) {}

std::size_t Tensor::Offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw InvalidArgument("index rank does not match tensor rank");
  }
  std::size_t off = 0;
  std::size_t dim = 0;
  for (auto i : index) {
    if (i >= shape_[dim]) throw InvalidArgument("tensor index out of range");
    off = off * shape_[dim] + i;
    ++dim;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[Offset(index)];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[Offset(index)];
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (NumElements(shape) != data_.size()) {
    throw InvalidArgument("cannot reshape " + ShapeToString(shape_) + " to " +
                          ShapeToString(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  RequireSameShape(*this, other, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  RequireSameShape(*this, other, "tensor -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

Tensor& Tensor::Axpy(double s, const Tensor& other) {
  RequireSameShape(*this, other, "tensor axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  return *this;
}

double Tensor::MaxAbs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Tensor::Norm2() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Tensor::Sum() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::vector<std::uint8_t> Tensor::Bytes() const {
  std::vector<std::uint8_t> out(data_.size() * sizeof(double));
  for (std::size_t i = 0; i < data_.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(data_[i]);
    for (int b = 0; b < 8; ++b) {
      out[i * 8 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
  }
  return out;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double s, Tensor a) { return a *= s; }

double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "MaxAbsDiff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

double RelError(const Tensor& a, const Tensor& b, double floor) {
  return MaxAbsDiff(a, b) / std::max(b.MaxAbs(), floor);
}

Tensor RoundTo(Precision p, Tensor t) {
  if (p == Precision::kF32) {
    for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  }
  return t;
}

std::uint64_t Fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Digest(const Tensor& t) { return Fnv1a64(t.Bytes()); }

void RequireShape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw InvalidArgument(std::string(what) + ": expected shape " +
                          ShapeToString(expected) + ", got " +
                          ShapeToString(t.shape()));
  }
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch " +
                          ShapeToString(a.shape()) + " vs " +
                          ShapeToString(b.shape()));
  }
}

}  // namespace vbmask
