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

#ifndef VBMASK_RNG_H_
#define VBMASK_RNG_H_

#include <cstdint>
#include <random>

#include "vbmask/tensor.h"

namespace vbmask {

// Derives an independent 64-bit seed for stream `stream`, index `index`
// from a session seed (splitmix64 finalizer over the mixed inputs).
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t index = 0);

// Seeded generator used throughout the library. All randomness flows
// through this type so that a session seed fixes every draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double Normal(double mean = 0.0, double stddev = 1.0);
  double Uniform(double lo, double hi);
  // Uniform on [-hi, -lo] U [lo, hi].
  double SignedUniform(double lo, double hi);
  bool Bernoulli(double p);
  std::uint64_t Index(std::uint64_t n);

  Tensor NormalTensor(const Shape& shape, double mean, double stddev);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace vbmask

#endif  // VBMASK_RNG_H_
