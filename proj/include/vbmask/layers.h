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

// Layer definitions and per-sample kernels.
//
// Shapes are per sample (no batch axis): dense inputs are [in], conv2d and
// maxpool inputs are [channels, height, width]. Dense weights are
// [out, in]; conv2d weights are [out_channels, in_channels, k, k].
//
// Only dense and conv2d are bilinear; those are the kernels a worker runs on
// masked data. Everything else runs on the coordinator.

#ifndef VBMASK_LAYERS_H_
#define VBMASK_LAYERS_H_

#include <cstddef>
#include <string>

#include "vbmask/tensor.h"

namespace vbmask {

enum class LayerKind { kDense, kConv2d, kRelu, kMaxPool, kFlatten };

std::string LayerKindName(LayerKind kind);
LayerKind ParseLayerKind(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  // dense
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  // conv2d
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  // maxpool: square window, stride equal to the window
  std::size_t window = 0;

  static LayerSpec Dense(std::size_t in, std::size_t out);
  static LayerSpec Conv2d(std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel, std::size_t stride = 1,
                          std::size_t padding = 0);
  static LayerSpec Relu();
  static LayerSpec MaxPool(std::size_t window);
  static LayerSpec Flatten();

  bool bilinear() const {
    return kind == LayerKind::kDense || kind == LayerKind::kConv2d;
  }

  Shape OutputShape(const Shape& input) const;
  Shape WeightShape() const;
  Shape BiasShape() const;
  std::string Describe() const;
};

// <W, x>. Linear in x.
Tensor LinearForward(const LayerSpec& layer, const Tensor& weight,
                     const Tensor& x, Precision p = Precision::kF64);

// <delta, x>: the per-sample weight gradient. Bilinear in (delta, x).
Tensor WeightGrad(const LayerSpec& layer, const Tensor& delta, const Tensor& x,
                  Precision p = Precision::kF64);

// dLoss/dx given delta = dLoss/dy. Linear in delta.
Tensor InputGrad(const LayerSpec& layer, const Tensor& weight,
                 const Tensor& delta, Precision p = Precision::kF64);
// Strided convolutions can map several input extents to one output extent;
// this overload takes the input shape explicitly.
Tensor InputGrad(const LayerSpec& layer, const Tensor& weight,
                 const Tensor& delta, const Shape& input_shape,
                 Precision p = Precision::kF64);

Tensor NonlinearForward(const LayerSpec& layer, const Tensor& x);
// Maxpool routes each window's gradient to its first (row-major) maximum.
Tensor NonlinearBackward(const LayerSpec& layer, const Tensor& x,
                         const Tensor& delta);

// Bias terms never leave the coordinator.
Tensor AddBias(const LayerSpec& layer, Tensor y, const Tensor& bias);
Tensor BiasGrad(const LayerSpec& layer, const Tensor& delta);

}  // namespace vbmask

#endif  // VBMASK_LAYERS_H_
