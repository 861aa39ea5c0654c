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

// Secret coding schemes for masked offload of bilinear operations.
//
// A virtual batch stacks K inputs and M noise tensors as sources
// z = [x_1 .. x_K, r_1 .. r_M] (P = K + M). Encoding j is the linear
// combination
//
//     xbar_j = sum_s A(s, j) * z_s,        j = 0 .. P-1,
//
// i.e. Xbar = Z * A with one source per row of A and one encoding per
// column. Because a worker's operation f is linear in its masked operand,
// f(Xbar) = f(Z) * A and the coordinator recovers f(x_i) as column i of
// f(Xbar) * A^-1.
//
// For weight gradients each worker j receives the combined gradient
// D_j = sum_i B(j, i) * delta_i together with its forward encoding and returns
// Eq_j = <D_j, xbar_j>. The scheme satisfies
//
//     sum_j B(j, i) * gamma_j * A(s, j) = [i == s]   (i < K, s < P)
//
// so sum_j gamma_j * Eq_j = sum_i <delta_i, x_i>: noise images cancel and
// only the batch-summed weight gradient is ever decoded.
//
// Integrity: E extension columns A_ext produce redundant encodings whose
// results must equal f(Z) * A_ext. For gradients, one extra equation
// together with a second decoding vector gamma_check gives two independent
// decodings of the same gradient sum.

#ifndef VBMASK_CODING_H_
#define VBMASK_CODING_H_

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "vbmask/rng.h"
#include "vbmask/tensor.h"

namespace vbmask {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultTau = 1e-6;
inline constexpr double kResidualFloor = 1e-30;

struct SchemeOptions {
  int K = 2;
  int M = 1;
  int E = 0;
  // Floor on the Euclidean norm of every noise-coefficient column of A.
  double c_min = 0.0;
  std::uint64_t seed = 0;
  // M == 1 only: keep A exactly orthogonal (rejection-sample for c_min)
  // instead of rescaling the noise rows.
  bool orthogonal = true;
  int max_retries = 1000;
  double max_condition = 1e6;
  // Minimum |(A^-1 a_ext)_j|: every encoding must contribute to every
  // forward integrity check.
  double ext_coverage_floor = 0.1;
};

struct CodingScheme {
  int K = 0;
  int M = 0;
  int E = 0;
  std::uint64_t seed = 0;
  std::uint64_t id = 0;

  Matrix A;       // P x P, rows = sources, columns = encodings
  Matrix A_inv;   // P x P
  Matrix B;       // P x K, combined-gradient coefficients beta(j, i)
  Vector gamma;   // P, nonzero gradient decoding weights
  Matrix A_ext;   // P x E forward integrity columns

  // Extra gradient equation: encoding coefficients over the sources, the
  // gradient combination it is paired with, and a second decoding vector over
  // all P + 1 equations (zero in at least one base position).
  Vector grad_ext_a;
  Vector grad_ext_b;
  Vector gamma_check;
  // True when the extra gradient equation reuses forward extension 0, so it
  // can run on the worker that already holds that encoding.
  bool grad_ext_reuses_forward = false;

  int P() const { return K + M; }
  bool HasGradCheck() const { return gamma_check.size() > 0; }
  // Encodings a worker set receives in the forward pass (P + E).
  int NumForwardEncodings() const { return P() + E; }
};

// Draws a fresh scheme. Throws SchemeGenerationError when no acceptable draw
// is found within max_retries.
CodingScheme GenerateScheme(const SchemeOptions& opts);

// Builds a scheme around a caller-chosen A (e.g. identity or a permutation),
// deriving B and the integrity data. `seed` drives the remaining draws.
CodingScheme MakeScheme(int K, int M, Matrix A, Vector gamma,
                        Matrix A_ext = Matrix(), std::uint64_t seed = 0);

// || B^T Gamma A^T - [I_K | 0] ||_inf for the storage convention above.
double ConstraintResidual(const CodingScheme& s);
// Same constraint for gamma_check over all P + 1 gradient equations.
double GradCheckResidual(const CodingScheme& s);
double OrthogonalityResidual(const CodingScheme& s);
Vector NoiseColumnNorms(const CodingScheme& s);
double ConditionNumber(const Matrix& m);
// max / min |A(s, j)| over all entries.
double MaxAbsCoefficient(const CodingScheme& s);
double MinAbsCoefficient(const CodingScheme& s);

struct NoiseSpec {
  double mean = 0.0;
  double variance = 1e8;
};

struct VirtualBatch {
  std::vector<Tensor> inputs;  // K
  std::vector<Tensor> noises;  // M

  const Shape& shape() const { return inputs.front().shape(); }
  void Validate() const;
};

VirtualBatch MakeVirtualBatch(std::vector<Tensor> inputs, int M,
                              const NoiseSpec& noise, Rng& rng);

struct EncodedBatch {
  std::vector<Tensor> encoded;  // P base encodings followed by E extensions
  std::uint64_t scheme_id = 0;
};

// sum_s coeffs[s] * terms[s], accumulated in ascending s at precision p.
Tensor LinearCombination(std::span<const Tensor> terms,
                         std::span<const double> coeffs, Precision p);

EncodedBatch Encode(const VirtualBatch& batch, const CodingScheme& scheme,
                    Precision p = Precision::kF64);

// Encodes an arbitrary coefficient column over the batch sources.
Tensor EncodeColumn(const VirtualBatch& batch, const Vector& coeffs,
                    Precision p = Precision::kF64);

// All P columns of Ybar * A^-1: K decoded outputs then M noise images.
std::vector<Tensor> DecodeAugmented(std::span<const Tensor> ybar,
                                    const CodingScheme& scheme,
                                    Precision p = Precision::kF64);

// First K columns of Ybar * A^-1. Only the first P results are read.
std::vector<Tensor> DecodeForward(std::span<const Tensor> ybar,
                                  const CodingScheme& scheme,
                                  Precision p = Precision::kF64);

struct GradCoefficients {
  Matrix B;
  Vector gamma;
};

GradCoefficients GradCoefficientsOf(const CodingScheme& scheme);

// D_j = sum_i B(j, i) * delta_i for j < P, plus the extra equation's
// combination when `with_check` is set.
std::vector<Tensor> CombineGradients(std::span<const Tensor> deltas,
                                     const CodingScheme& scheme,
                                     bool with_check = false,
                                     Precision p = Precision::kF64);

// sum_j gamma_j * eqs[j] over j < P in ascending order. Returns the SUM of
// the per-input weight gradients; callers apply the 1/batch factor.
Tensor DecodeGrad(std::span<const Tensor> eqs, const CodingScheme& scheme,
                  Precision p = Precision::kF64);

struct IntegrityVerdict {
  bool passed = true;
  double max_residual = 0.0;
  std::optional<int> offending_index;
  double tau = kDefaultTau;
};

// Checks each forward extension result against f(Z) * A_ext, where f(Z) is
// reconstructed from the first P results.
IntegrityVerdict VerifyForward(std::span<const Tensor> ybar_full,
                               const CodingScheme& scheme,
                               double tau = kDefaultTau,
                               Precision p = Precision::kF64);

// Decodes the gradient sum with gamma and with gamma_check (P + 1 equations)
// and compares the two.
IntegrityVerdict VerifyGrad(std::span<const Tensor> eqs,
                            const CodingScheme& scheme,
                            double tau = kDefaultTau,
                            Precision p = Precision::kF64);

// Debug export: {K, M, E, seed, A, B, Gamma, A_ext}, matrices row-major.
nlohmann::json SchemeToJson(const CodingScheme& scheme);

}  // namespace vbmask

#endif  // VBMASK_CODING_H_
