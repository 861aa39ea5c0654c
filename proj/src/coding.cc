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

#include "vbmask/coding.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vbmask/errors.h"

namespace vbmask {
namespace {

constexpr std::uint64_t kSchemeIdStream = 0x4944;  // "ID"

Matrix GaussianMatrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.Normal();
  }
  return m;
}

// Q factor of a Gaussian draw, columns sign-fixed so R has a positive
// diagonal.
Matrix RandomOrthogonal(int n, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(GaussianMatrix(n, n, rng));
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix& r = qr.matrixQR();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

// Relation coefficients d with sum_j d_j * (b_j a_j^T) = b_e a_e^T, where
// b_j = B.row(j) and a_j = A.col(j). Requires b_j parallel to b_e wherever
// (A^-1 a_e)_j != 0.
Vector ExtensionRelation(const CodingScheme& s, const Vector& a_e,
                         const Vector& b_e) {
  const Vector v = s.A_inv * a_e;
  Vector d = Vector::Zero(s.P());
  for (int j = 0; j < s.P(); ++j) {
    const Vector b_j = s.B.row(j).transpose();
    const double bb = b_j.squaredNorm();
    if (bb == 0.0) continue;
    d(j) = v(j) * b_j.dot(b_e) / bb;
  }
  return d;
}

// Derives B, A^-1 and the gradient check from A, gamma and A_ext.
void Complete(CodingScheme& s, Rng& rng) {
  const int P = s.P();
  Eigen::FullPivLU<Matrix> lu(s.A);
  if (!lu.isInvertible()) throw SchemeGenerationError("coding matrix is singular");
  s.A_inv = lu.inverse();
  for (int j = 0; j < P; ++j) {
    if (s.gamma(j) == 0.0) throw SchemeGenerationError("gamma entries must be nonzero");
  }
  // B^T = [I | 0] A^-T Gamma^-1  <=>  B(j, i) = A^-1(j, i) / gamma_j.
  s.B = s.gamma.cwiseInverse().asDiagonal() * s.A_inv.leftCols(s.K);
  s.id = DeriveSeed(s.seed, kSchemeIdStream);

  s.grad_ext_a.resize(0);
  s.grad_ext_b.resize(0);
  s.gamma_check.resize(0);
  s.grad_ext_reuses_forward = false;
  if (s.E == 0) return;

  if (s.K == 1) {
    // Scalar gradient combinations are always parallel, so the extra
    // equation can reuse forward extension 0 and cover every worker.
    s.grad_ext_a = s.A_ext.col(0);
    s.grad_ext_b = Vector::Constant(1, rng.SignedUniform(0.5, 2.0));
    s.grad_ext_reuses_forward = true;
  } else {
    // With K >= 2 an extra rank-one equation can only be related to workers
    // whose B rows are parallel to its own; re-run one randomly chosen
    // worker's equation on a rescaled copy of its encoding.
    const auto anchor = static_cast<Eigen::Index>(rng.Index(P));
    const double scale = rng.SignedUniform(0.5, 2.0);
    s.grad_ext_a = scale * s.A.col(anchor);
    s.grad_ext_b = s.B.row(anchor).transpose();
  }
  const Vector d = ExtensionRelation(s, s.grad_ext_a, s.grad_ext_b);
  Eigen::Index pivot = 0;
  d.cwiseAbs().maxCoeff(&pivot);
  if (d(pivot) == 0.0) {
    throw SchemeGenerationError("gradient check relation is degenerate");
  }
  const double mu = s.gamma(pivot) / d(pivot);
  s.gamma_check.resize(P + 1);
  s.gamma_check.head(P) = s.gamma - mu * d;
  s.gamma_check(pivot) = 0.0;
  s.gamma_check(P) = mu;
}

bool ExtensionCoverageOk(const CodingScheme& s, double floor) {
  if (s.E == 0) return true;
  const Matrix v = s.A_inv * s.A_ext;
  return v.cwiseAbs().minCoeff() >= floor;
}

void RequireComplete(std::span<const Tensor> results, std::size_t needed,
                     const char* what) {
  if (results.size() < needed) {
    throw IncompleteBatch(std::string(what) + ": " +
                          std::to_string(results.size()) + " results, need " +
                          std::to_string(needed));
  }
  for (std::size_t j = 0; j < needed; ++j) {
    if (results[j].empty()) {
      throw IncompleteBatch(std::string(what) + ": result " + std::to_string(j) +
                            " missing");
    }
  }
}

template <typename T>
Tensor Combine(std::span<const Tensor> terms, std::span<const double> coeffs) {
  const Tensor& first = terms.front();
  std::vector<T> acc(first.size(), T(0));
  for (std::size_t s = 0; s < terms.size(); ++s) {
    RequireSameShape(first, terms[s], "LinearCombination");
    const T c = static_cast<T>(coeffs[s]);
    const auto& v = terms[s].values();
    for (std::size_t i = 0; i < acc.size(); ++i) {
      acc[i] += c * static_cast<T>(v[i]);
    }
  }
  return Tensor(first.shape(), std::vector<double>(acc.begin(), acc.end()));
}

std::vector<double> ColumnOf(const Matrix& m, Eigen::Index col) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[r] = m(r, col);
  return out;
}

std::vector<double> ToStd(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json MatrixToJson(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

CodingScheme GenerateScheme(const SchemeOptions& opts) {
  if (opts.K < 1 || opts.M < 1 || opts.E < 0) {
    throw InvalidArgument("scheme needs K >= 1, M >= 1, E >= 0");
  }
  if (opts.c_min < 0.0) throw InvalidArgument("c_min must be non-negative");
  const int P = opts.K + opts.M;
  Rng rng(opts.seed);
  const bool keep_orthogonal = opts.M == 1 && opts.orthogonal;

  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    CodingScheme s;
    s.K = opts.K;
    s.M = opts.M;
    s.E = opts.E;
    s.seed = opts.seed;
    s.A = RandomOrthogonal(P, rng);

    Vector norms = s.A.bottomRows(opts.M).colwise().norm().transpose();
    if (keep_orthogonal) {
      if (norms.minCoeff() < opts.c_min) continue;
    } else if (opts.c_min > 0.0) {
      const double min_norm = norms.minCoeff();
      if (min_norm == 0.0) continue;
      if (min_norm < opts.c_min) s.A.bottomRows(opts.M) *= opts.c_min / min_norm;
      if (ConditionNumber(s.A) > opts.max_condition) continue;
    }

    s.gamma.resize(P);
    for (int j = 0; j < P; ++j) s.gamma(j) = rng.SignedUniform(0.5, 2.0);
    s.A_ext = GaussianMatrix(P, opts.E, rng);
    try {
      Complete(s, rng);
    } catch (const SchemeGenerationError&) {
      continue;
    }
    if (!ExtensionCoverageOk(s, opts.ext_coverage_floor)) continue;
    return s;
  }
  throw SchemeGenerationError(
      "no acceptable coding scheme after " + std::to_string(opts.max_retries) +
      " retries (K=" + std::to_string(opts.K) + ", M=" + std::to_string(opts.M) +
      ", c_min=" + std::to_string(opts.c_min) + ")");
}

CodingScheme MakeScheme(int K, int M, Matrix A, Vector gamma, Matrix A_ext,
                        std::uint64_t seed) {
  const int P = K + M;
  if (K < 1 || M < 1) throw InvalidArgument("scheme needs K >= 1, M >= 1");
  if (A.rows() != P || A.cols() != P || gamma.size() != P) {
    throw InvalidArgument("coding matrix must be P x P with P gamma entries");
  }
  if (A_ext.size() != 0 && A_ext.rows() != P) {
    throw InvalidArgument("extension columns must have P rows");
  }
  CodingScheme s;
  s.K = K;
  s.M = M;
  s.E = static_cast<int>(A_ext.cols());
  s.seed = seed;
  s.A = std::move(A);
  s.gamma = std::move(gamma);
  s.A_ext = A_ext.size() ? std::move(A_ext) : Matrix(P, 0);
  Rng rng(seed);
  Complete(s, rng);
  return s;
}

double ConstraintResidual(const CodingScheme& s) {
  Matrix target = Matrix::Zero(s.K, s.P());
  target.leftCols(s.K).setIdentity();
  Matrix lhs = s.B.transpose() * s.gamma.asDiagonal() * s.A.transpose();
  return (lhs - target).cwiseAbs().maxCoeff();
}

double GradCheckResidual(const CodingScheme& s) {
  if (!s.HasGradCheck()) throw IntegrityNotEnabled("scheme has no gradient check");
  const int P = s.P();
  Matrix b_all(P + 1, s.K);
  b_all.topRows(P) = s.B;
  b_all.row(P) = s.grad_ext_b.transpose();
  Matrix a_all(P, P + 1);
  a_all.leftCols(P) = s.A;
  a_all.col(P) = s.grad_ext_a;
  Matrix target = Matrix::Zero(s.K, P);
  target.leftCols(s.K).setIdentity();
  Matrix lhs = b_all.transpose() * s.gamma_check.asDiagonal() * a_all.transpose();
  return (lhs - target).cwiseAbs().maxCoeff();
}

double OrthogonalityResidual(const CodingScheme& s) {
  return (s.A.transpose() * s.A - Matrix::Identity(s.P(), s.P()))
      .cwiseAbs()
      .maxCoeff();
}

Vector NoiseColumnNorms(const CodingScheme& s) {
  return s.A.bottomRows(s.M).colwise().norm().transpose();
}

double ConditionNumber(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / sv(sv.size() - 1);
}

double MaxAbsCoefficient(const CodingScheme& s) {
  return s.A.cwiseAbs().maxCoeff();
}

double MinAbsCoefficient(const CodingScheme& s) {
  return s.A.cwiseAbs().minCoeff();
}

void VirtualBatch::Validate() const {
  if (inputs.empty() || noises.empty()) {
    throw InvalidArgument("virtual batch needs K >= 1 inputs and M >= 1 noises");
  }
  for (const auto& x : inputs) RequireSameShape(inputs.front(), x, "virtual batch input");
  for (const auto& r : noises) RequireSameShape(inputs.front(), r, "virtual batch noise");
}

VirtualBatch MakeVirtualBatch(std::vector<Tensor> inputs, int M,
                              const NoiseSpec& noise, Rng& rng) {
  if (inputs.empty()) throw InvalidArgument("virtual batch needs inputs");
  if (noise.variance < 0.0) throw InvalidArgument("noise variance must be >= 0");
  VirtualBatch batch;
  const Shape shape = inputs.front().shape();
  batch.inputs = std::move(inputs);
  for (int m = 0; m < M; ++m) {
    batch.noises.push_back(
        rng.NormalTensor(shape, noise.mean, std::sqrt(noise.variance)));
  }
  batch.Validate();
  return batch;
}

Tensor LinearCombination(std::span<const Tensor> terms,
                         std::span<const double> coeffs, Precision p) {
  if (terms.empty() || terms.size() != coeffs.size()) {
    throw InvalidArgument("LinearCombination: term/coefficient count mismatch");
  }
  return p == Precision::kF32 ? Combine<float>(terms, coeffs)
                              : Combine<double>(terms, coeffs);
}

Tensor EncodeColumn(const VirtualBatch& batch, const Vector& coeffs,
                    Precision p) {
  std::vector<Tensor> sources = batch.inputs;
  sources.insert(sources.end(), batch.noises.begin(), batch.noises.end());
  if (static_cast<Eigen::Index>(sources.size()) != coeffs.size()) {
    throw InvalidArgument("EncodeColumn: coefficient count does not match P");
  }
  return LinearCombination(sources, ToStd(coeffs), p);
}

EncodedBatch Encode(const VirtualBatch& batch, const CodingScheme& scheme,
                    Precision p) {
  batch.Validate();
  if (static_cast<int>(batch.inputs.size()) != scheme.K ||
      static_cast<int>(batch.noises.size()) != scheme.M) {
    throw InvalidArgument("virtual batch has " +
                          std::to_string(batch.inputs.size()) + " inputs and " +
                          std::to_string(batch.noises.size()) +
                          " noises; scheme expects K=" + std::to_string(scheme.K) +
                          ", M=" + std::to_string(scheme.M));
  }
  std::vector<Tensor> sources = batch.inputs;
  sources.insert(sources.end(), batch.noises.begin(), batch.noises.end());
  EncodedBatch out;
  out.scheme_id = scheme.id;
  for (int j = 0; j < scheme.P(); ++j) {
    out.encoded.push_back(LinearCombination(sources, ColumnOf(scheme.A, j), p));
  }
  for (int e = 0; e < scheme.E; ++e) {
    out.encoded.push_back(
        LinearCombination(sources, ColumnOf(scheme.A_ext, e), p));
  }
  return out;
}

std::vector<Tensor> DecodeAugmented(std::span<const Tensor> ybar,
                                    const CodingScheme& scheme, Precision p) {
  const auto P = static_cast<std::size_t>(scheme.P());
  RequireComplete(ybar, P, "decode");
  auto base = ybar.first(P);
  std::vector<Tensor> out;
  for (std::size_t s = 0; s < P; ++s) {
    // Column s of Ybar * A^-1: coefficients A^-1(j, s) over results j.
    out.push_back(LinearCombination(
        base, ColumnOf(scheme.A_inv, static_cast<Eigen::Index>(s)), p));
  }
  return out;
}

std::vector<Tensor> DecodeForward(std::span<const Tensor> ybar,
                                  const CodingScheme& scheme, Precision p) {
  auto all = DecodeAugmented(ybar, scheme, p);
  all.resize(static_cast<std::size_t>(scheme.K));
  return all;
}

GradCoefficients GradCoefficientsOf(const CodingScheme& scheme) {
  return {scheme.B, scheme.gamma};
}

std::vector<Tensor> CombineGradients(std::span<const Tensor> deltas,
                                     const CodingScheme& scheme,
                                     bool with_check, Precision p) {
  if (static_cast<int>(deltas.size()) != scheme.K) {
    throw InvalidArgument("CombineGradients: expected K=" +
                          std::to_string(scheme.K) + " deltas, got " +
                          std::to_string(deltas.size()));
  }
  std::vector<Tensor> out;
  for (int j = 0; j < scheme.P(); ++j) {
    out.push_back(LinearCombination(
        deltas, ToStd(scheme.B.row(j).transpose()), p));
  }
  if (with_check) {
    if (!scheme.HasGradCheck()) {
      throw IntegrityNotEnabled("scheme has no gradient check equation");
    }
    out.push_back(LinearCombination(deltas, ToStd(scheme.grad_ext_b), p));
  }
  return out;
}

Tensor DecodeGrad(std::span<const Tensor> eqs, const CodingScheme& scheme,
                  Precision p) {
  const auto P = static_cast<std::size_t>(scheme.P());
  RequireComplete(eqs, P, "DecodeGrad");
  return LinearCombination(eqs.first(P), ToStd(scheme.gamma), p);
}

IntegrityVerdict VerifyForward(std::span<const Tensor> ybar_full,
                               const CodingScheme& scheme, double tau,
                               Precision p) {
  if (scheme.E == 0) {
    throw IntegrityNotEnabled("scheme was generated without extension columns");
  }
  const auto P = static_cast<std::size_t>(scheme.P());
  RequireComplete(ybar_full, P + static_cast<std::size_t>(scheme.E),
                  "VerifyForward");
  auto augmented = DecodeAugmented(ybar_full, scheme, p);
  IntegrityVerdict verdict;
  verdict.tau = tau;
  for (int e = 0; e < scheme.E; ++e) {
    Tensor predicted =
        LinearCombination(augmented, ColumnOf(scheme.A_ext, e), p);
    const Tensor& observed = ybar_full[P + static_cast<std::size_t>(e)];
    const double residual =
        MaxAbsDiff(predicted, observed) / (observed.MaxAbs() + kResidualFloor);
    if (!verdict.offending_index || residual > verdict.max_residual) {
      verdict.max_residual = residual;
      verdict.offending_index = e;
    }
  }
  verdict.passed = verdict.max_residual < tau;
  if (verdict.passed) verdict.offending_index.reset();
  return verdict;
}

IntegrityVerdict VerifyGrad(std::span<const Tensor> eqs,
                            const CodingScheme& scheme, double tau,
                            Precision p) {
  if (!scheme.HasGradCheck()) {
    throw IntegrityNotEnabled("scheme was generated without a gradient check");
  }
  const auto P = static_cast<std::size_t>(scheme.P());
  RequireComplete(eqs, P + 1, "VerifyGrad");
  Tensor first = LinearCombination(eqs.first(P), ToStd(scheme.gamma), p);
  Tensor second = LinearCombination(eqs.first(P + 1), ToStd(scheme.gamma_check), p);
  IntegrityVerdict verdict;
  verdict.tau = tau;
  verdict.max_residual =
      MaxAbsDiff(first, second) / (first.MaxAbs() + kResidualFloor);
  verdict.passed = verdict.max_residual < tau;
  return verdict;
}

nlohmann::json SchemeToJson(const CodingScheme& scheme) {
  return {{"K", scheme.K},
          {"M", scheme.M},
          {"E", scheme.E},
          {"seed", scheme.seed},
          {"A", MatrixToJson(scheme.A)},
          {"B", MatrixToJson(scheme.B)},
          {"Gamma", ToStd(scheme.gamma)},
          {"A_ext", MatrixToJson(scheme.A_ext)}};
}

}  // namespace vbmask
