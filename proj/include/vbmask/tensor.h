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

#ifndef VBMASK_TENSOR_H_
#define VBMASK_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vbmask {

using Shape = std::vector<std::size_t>;

// Arithmetic precision of a computation. Storage is always double; in kF32
// mode every kernel rounds its operands to float and accumulates in float,
// so results carry single-precision round-off.
enum class Precision { kF64, kF32 };

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);
Precision ParsePrecision(const std::string& name);
std::string PrecisionName(Precision p);

// Dense row-major n-dimensional array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);
  Tensor(Shape shape, std::initializer_list<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Bounds-checked multi-index access.
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  Tensor Reshaped(Shape shape) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);
  // this += s * other
  Tensor& Axpy(double s, const Tensor& other);

  double MaxAbs() const;
  double Norm2() const;
  double Sum() const;
  bool AllFinite() const;

  // Little-endian IEEE-754 bytes of the data, used for digests.
  std::vector<std::uint8_t> Bytes() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  std::size_t Offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double s, Tensor a);

// max_i |a_i - b_i|
double MaxAbsDiff(const Tensor& a, const Tensor& b);
// max_i |a_i - b_i| / max(max_i |b_i|, floor)
double RelError(const Tensor& a, const Tensor& b, double floor = 1e-300);

// Rounds every entry to the nearest float when p == kF32.
Tensor RoundTo(Precision p, Tensor t);

// FNV-1a 64-bit over the tensor's byte stream.
std::uint64_t Fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t Digest(const Tensor& t);

void RequireShape(const Tensor& t, const Shape& expected, const char* what);
void RequireSameShape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace vbmask

#endif  // VBMASK_TENSOR_H_
