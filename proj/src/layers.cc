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

#include "vbmask/layers.h"

#include <vector>

#include "vbmask/errors.h"

namespace vbmask {
namespace {

template <typename T>
std::vector<T> Cast(const Tensor& t) {
  return std::vector<T>(t.values().begin(), t.values().end());
}

template <typename T>
Tensor FromVector(Shape shape, const std::vector<T>& v) {
  return Tensor(std::move(shape), std::vector<double>(v.begin(), v.end()));
}

struct ConvGeometry {
  std::size_t c, h, w;       // input
  std::size_t oc, oh, ow;    // output
  std::size_t k, stride, pad;

  // Input coordinate for output position o and kernel offset kk, or -1 when
  // the tap falls in the zero padding.
  long Tap(std::size_t o, std::size_t kk, std::size_t extent) const {
    long pos = static_cast<long>(o * stride + kk) - static_cast<long>(pad);
    if (pos < 0 || pos >= static_cast<long>(extent)) return -1;
    return pos;
  }
};

ConvGeometry Geometry(const LayerSpec& layer, const Shape& in) {
  Shape out = layer.OutputShape(in);
  return {in[0], in[1], in[2], out[0], out[1], out[2],
          layer.kernel, layer.stride, layer.padding};
}

template <typename T>
Tensor DenseForward(const LayerSpec& l, const Tensor& weight, const Tensor& x) {
  auto w = Cast<T>(weight);
  auto xv = Cast<T>(x);
  std::vector<T> y(l.out_features, T(0));
  for (std::size_t o = 0; o < l.out_features; ++o) {
    T acc = 0;
    for (std::size_t i = 0; i < l.in_features; ++i) {
      acc += w[o * l.in_features + i] * xv[i];
    }
    y[o] = acc;
  }
  return FromVector({l.out_features}, y);
}

template <typename T>
Tensor DenseWeightGrad(const LayerSpec& l, const Tensor& delta,
                       const Tensor& x) {
  auto d = Cast<T>(delta);
  auto xv = Cast<T>(x);
  std::vector<T> g(l.out_features * l.in_features);
  for (std::size_t o = 0; o < l.out_features; ++o) {
    for (std::size_t i = 0; i < l.in_features; ++i) {
      g[o * l.in_features + i] = d[o] * xv[i];
    }
  }
  return FromVector({l.out_features, l.in_features}, g);
}

template <typename T>
Tensor DenseInputGrad(const LayerSpec& l, const Tensor& weight,
                      const Tensor& delta) {
  auto w = Cast<T>(weight);
  auto d = Cast<T>(delta);
  std::vector<T> g(l.in_features, T(0));
  for (std::size_t o = 0; o < l.out_features; ++o) {
    for (std::size_t i = 0; i < l.in_features; ++i) {
      g[i] += w[o * l.in_features + i] * d[o];
    }
  }
  return FromVector({l.in_features}, g);
}

template <typename T>
Tensor ConvForward(const LayerSpec& l, const Tensor& weight, const Tensor& x) {
  const auto g = Geometry(l, x.shape());
  auto w = Cast<T>(weight);
  auto xv = Cast<T>(x);
  std::vector<T> y(g.oc * g.oh * g.ow, T(0));
  for (std::size_t oc = 0; oc < g.oc; ++oc) {
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        T acc = 0;
        for (std::size_t c = 0; c < g.c; ++c) {
          for (std::size_t ky = 0; ky < g.k; ++ky) {
            long iy = g.Tap(oy, ky, g.h);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < g.k; ++kx) {
              long ix = g.Tap(ox, kx, g.w);
              if (ix < 0) continue;
              acc += w[((oc * g.c + c) * g.k + ky) * g.k + kx] *
                     xv[(c * g.h + iy) * g.w + ix];
            }
          }
        }
        y[(oc * g.oh + oy) * g.ow + ox] = acc;
      }
    }
  }
  return FromVector({g.oc, g.oh, g.ow}, y);
}

template <typename T>
Tensor ConvWeightGrad(const LayerSpec& l, const Tensor& delta,
                      const Tensor& x) {
  const auto g = Geometry(l, x.shape());
  auto d = Cast<T>(delta);
  auto xv = Cast<T>(x);
  std::vector<T> gw(g.oc * g.c * g.k * g.k, T(0));
  for (std::size_t oc = 0; oc < g.oc; ++oc) {
    for (std::size_t c = 0; c < g.c; ++c) {
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          T acc = 0;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            long iy = g.Tap(oy, ky, g.h);
            if (iy < 0) continue;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              long ix = g.Tap(ox, kx, g.w);
              if (ix < 0) continue;
              acc += d[(oc * g.oh + oy) * g.ow + ox] *
                     xv[(c * g.h + iy) * g.w + ix];
            }
          }
          gw[((oc * g.c + c) * g.k + ky) * g.k + kx] = acc;
        }
      }
    }
  }
  return FromVector({g.oc, g.c, g.k, g.k}, gw);
}

template <typename T>
Tensor ConvInputGrad(const LayerSpec& l, const Tensor& weight,
                     const Tensor& delta, const Shape& in) {
  const auto g = Geometry(l, in);
  auto w = Cast<T>(weight);
  auto d = Cast<T>(delta);
  std::vector<T> gx(g.c * g.h * g.w, T(0));
  for (std::size_t oc = 0; oc < g.oc; ++oc) {
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        const T dv = d[(oc * g.oh + oy) * g.ow + ox];
        for (std::size_t c = 0; c < g.c; ++c) {
          for (std::size_t ky = 0; ky < g.k; ++ky) {
            long iy = g.Tap(oy, ky, g.h);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < g.k; ++kx) {
              long ix = g.Tap(ox, kx, g.w);
              if (ix < 0) continue;
              gx[(c * g.h + iy) * g.w + ix] +=
                  w[((oc * g.c + c) * g.k + ky) * g.k + kx] * dv;
            }
          }
        }
      }
    }
  }
  return FromVector(Shape(in), gx);
}

void RequireBilinear(const LayerSpec& layer, const char* what) {
  if (!layer.bilinear()) {
    throw InvalidArgument(std::string(what) + " requires a bilinear layer, got " +
                          LayerKindName(layer.kind));
  }
}

// Recovers the input shape of a conv layer from its output shape.
Shape ConvInputShapeFromDelta(const LayerSpec& l, const Shape& out) {
  if (out.size() != 3 || out[0] != l.out_channels) {
    throw InvalidArgument("conv2d delta has shape " + ShapeToString(out));
  }
  // Smallest input extent producing this output extent.
  auto extent = [&](std::size_t o) {
    long e = static_cast<long>((o - 1) * l.stride + l.kernel) -
             2 * static_cast<long>(l.padding);
    if (e <= 0) throw InvalidArgument("conv2d delta shape is inconsistent");
    return static_cast<std::size_t>(e);
  };
  return {l.in_channels, extent(out[1]), extent(out[2])};
}

}  // namespace

std::string LayerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kFlatten: return "flatten";
  }
  return "unknown";
}

LayerKind ParseLayerKind(const std::string& name) {
  if (name == "dense") return LayerKind::kDense;
  if (name == "conv2d") return LayerKind::kConv2d;
  if (name == "relu") return LayerKind::kRelu;
  if (name == "maxpool") return LayerKind::kMaxPool;
  if (name == "flatten") return LayerKind::kFlatten;
  throw InvalidArgument("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::Dense(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw InvalidArgument("dense sizes must be positive");
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.in_features = in;
  s.out_features = out;
  return s;
}

LayerSpec LayerSpec::Conv2d(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
  if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0) {
    throw InvalidArgument("conv2d parameters must be positive");
  }
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::Relu() {
  LayerSpec s;
  s.kind = LayerKind::kRelu;
  return s;
}

LayerSpec LayerSpec::MaxPool(std::size_t window) {
  if (window == 0) throw InvalidArgument("maxpool window must be positive");
  LayerSpec s;
  s.kind = LayerKind::kMaxPool;
  s.window = window;
  return s;
}

LayerSpec LayerSpec::Flatten() {
  LayerSpec s;
  s.kind = LayerKind::kFlatten;
  return s;
}

Shape LayerSpec::OutputShape(const Shape& in) const {
  switch (kind) {
    case LayerKind::kDense:
      if (in != Shape{in_features}) {
        throw InvalidArgument("dense expects input " +
                              ShapeToString({in_features}) + ", got " +
                              ShapeToString(in));
      }
      return {out_features};
    case LayerKind::kConv2d: {
      if (in.size() != 3 || in[0] != in_channels) {
        throw InvalidArgument("conv2d expects [" + std::to_string(in_channels) +
                              ",H,W], got " + ShapeToString(in));
      }
      auto out_extent = [&](std::size_t e) {
        std::size_t padded = e + 2 * padding;
        if (padded < kernel) {
          throw InvalidArgument("conv2d kernel larger than padded input");
        }
        return (padded - kernel) / stride + 1;
      };
      return {out_channels, out_extent(in[1]), out_extent(in[2])};
    }
    case LayerKind::kRelu:
      return in;
    case LayerKind::kMaxPool:
      if (in.size() != 3 || in[1] < window || in[2] < window) {
        throw InvalidArgument("maxpool expects [C,H,W] with H,W >= window, got " +
                              ShapeToString(in));
      }
      return {in[0], in[1] / window, in[2] / window};
    case LayerKind::kFlatten:
      return {NumElements(in)};
  }
  throw InvalidArgument("unknown layer kind");
}

Shape LayerSpec::WeightShape() const {
  switch (kind) {
    case LayerKind::kDense: return {out_features, in_features};
    case LayerKind::kConv2d:
      return {out_channels, in_channels, kernel, kernel};
    default: return {};
  }
}

Shape LayerSpec::BiasShape() const {
  switch (kind) {
    case LayerKind::kDense: return {out_features};
    case LayerKind::kConv2d: return {out_channels};
    default: return {};
  }
}

std::string LayerSpec::Describe() const {
  switch (kind) {
    case LayerKind::kDense:
      return "dense(" + std::to_string(in_features) + "->" +
             std::to_string(out_features) + ")";
    case LayerKind::kConv2d:
      return "conv2d(" + std::to_string(in_channels) + "->" +
             std::to_string(out_channels) + ",k" + std::to_string(kernel) +
             ",s" + std::to_string(stride) + ",p" + std::to_string(padding) +
             ")";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool(" + std::to_string(window) + ")";
    case LayerKind::kFlatten: return "flatten";
  }
  return "unknown";
}

Tensor LinearForward(const LayerSpec& layer, const Tensor& weight,
                     const Tensor& x, Precision p) {
  RequireBilinear(layer, "LinearForward");
  RequireShape(weight, layer.WeightShape(), "LinearForward weight");
  layer.OutputShape(x.shape());
  const bool f32 = p == Precision::kF32;
  if (layer.kind == LayerKind::kDense) {
    return f32 ? DenseForward<float>(layer, weight, x)
               : DenseForward<double>(layer, weight, x);
  }
  return f32 ? ConvForward<float>(layer, weight, x)
             : ConvForward<double>(layer, weight, x);
}

Tensor WeightGrad(const LayerSpec& layer, const Tensor& delta, const Tensor& x,
                  Precision p) {
  RequireBilinear(layer, "WeightGrad");
  RequireShape(delta, layer.OutputShape(x.shape()), "WeightGrad delta");
  const bool f32 = p == Precision::kF32;
  if (layer.kind == LayerKind::kDense) {
    return f32 ? DenseWeightGrad<float>(layer, delta, x)
               : DenseWeightGrad<double>(layer, delta, x);
  }
  return f32 ? ConvWeightGrad<float>(layer, delta, x)
             : ConvWeightGrad<double>(layer, delta, x);
}

Tensor InputGrad(const LayerSpec& layer, const Tensor& weight,
                 const Tensor& delta, Precision p) {
  RequireBilinear(layer, "InputGrad");
  RequireShape(weight, layer.WeightShape(), "InputGrad weight");
  const bool f32 = p == Precision::kF32;
  if (layer.kind == LayerKind::kDense) {
    RequireShape(delta, {layer.out_features}, "InputGrad delta");
    return f32 ? DenseInputGrad<float>(layer, weight, delta)
               : DenseInputGrad<double>(layer, weight, delta);
  }
  return InputGrad(layer, weight, delta,
                   ConvInputShapeFromDelta(layer, delta.shape()), p);
}

Tensor InputGrad(const LayerSpec& layer, const Tensor& weight,
                 const Tensor& delta, const Shape& input_shape, Precision p) {
  RequireBilinear(layer, "InputGrad");
  RequireShape(weight, layer.WeightShape(), "InputGrad weight");
  RequireShape(delta, layer.OutputShape(input_shape), "InputGrad delta");
  const bool f32 = p == Precision::kF32;
  if (layer.kind == LayerKind::kDense) {
    return f32 ? DenseInputGrad<float>(layer, weight, delta)
               : DenseInputGrad<double>(layer, weight, delta);
  }
  return f32 ? ConvInputGrad<float>(layer, weight, delta, input_shape)
             : ConvInputGrad<double>(layer, weight, delta, input_shape);
}

Tensor NonlinearForward(const LayerSpec& layer, const Tensor& x) {
  switch (layer.kind) {
    case LayerKind::kRelu: {
      Tensor y = x;
      for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
      return y;
    }
    case LayerKind::kMaxPool: {
      Shape out = layer.OutputShape(x.shape());
      const std::size_t h = x.shape()[1], w = x.shape()[2], win = layer.window;
      Tensor y(out);
      for (std::size_t c = 0; c < out[0]; ++c) {
        for (std::size_t oy = 0; oy < out[1]; ++oy) {
          for (std::size_t ox = 0; ox < out[2]; ++ox) {
            double best = x[(c * h + oy * win) * w + ox * win];
            for (std::size_t dy = 0; dy < win; ++dy) {
              for (std::size_t dx = 0; dx < win; ++dx) {
                double v = x[(c * h + oy * win + dy) * w + ox * win + dx];
                if (v > best) best = v;
              }
            }
            y[(c * out[1] + oy) * out[2] + ox] = best;
          }
        }
      }
      return y;
    }
    case LayerKind::kFlatten:
      return x.Reshaped(layer.OutputShape(x.shape()));
    default:
      throw InvalidArgument("NonlinearForward on bilinear layer " +
                            layer.Describe());
  }
}

Tensor NonlinearBackward(const LayerSpec& layer, const Tensor& x,
                         const Tensor& delta) {
  RequireShape(delta, layer.OutputShape(x.shape()), "NonlinearBackward delta");
  switch (layer.kind) {
    case LayerKind::kRelu: {
      Tensor g = delta;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(x[i] > 0.0)) g[i] = 0.0;
      }
      return g;
    }
    case LayerKind::kMaxPool: {
      const Shape& out = delta.shape();
      const std::size_t h = x.shape()[1], w = x.shape()[2], win = layer.window;
      Tensor g(x.shape());
      for (std::size_t c = 0; c < out[0]; ++c) {
        for (std::size_t oy = 0; oy < out[1]; ++oy) {
          for (std::size_t ox = 0; ox < out[2]; ++ox) {
            std::size_t arg = (c * h + oy * win) * w + ox * win;
            for (std::size_t dy = 0; dy < win; ++dy) {
              for (std::size_t dx = 0; dx < win; ++dx) {
                std::size_t idx = (c * h + oy * win + dy) * w + ox * win + dx;
                if (x[idx] > x[arg]) arg = idx;
              }
            }
            g[arg] += delta[(c * out[1] + oy) * out[2] + ox];
          }
        }
      }
      return g;
    }
    case LayerKind::kFlatten:
      return delta.Reshaped(x.shape());
    default:
      throw InvalidArgument("NonlinearBackward on bilinear layer " +
                            layer.Describe());
  }
}

Tensor AddBias(const LayerSpec& layer, Tensor y, const Tensor& bias) {
  RequireBilinear(layer, "AddBias");
  RequireShape(bias, layer.BiasShape(), "AddBias bias");
  if (layer.kind == LayerKind::kDense) {
    RequireShape(y, {layer.out_features}, "AddBias output");
    for (std::size_t o = 0; o < y.size(); ++o) y[o] += bias[o];
    return y;
  }
  if (y.rank() != 3 || y.shape()[0] != layer.out_channels) {
    throw InvalidArgument("AddBias: conv2d output has shape " +
                          ShapeToString(y.shape()));
  }
  const std::size_t plane = y.shape()[1] * y.shape()[2];
  for (std::size_t c = 0; c < layer.out_channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) y[c * plane + i] += bias[c];
  }
  return y;
}

Tensor BiasGrad(const LayerSpec& layer, const Tensor& delta) {
  RequireBilinear(layer, "BiasGrad");
  if (layer.kind == LayerKind::kDense) {
    RequireShape(delta, {layer.out_features}, "BiasGrad delta");
    return delta;
  }
  if (delta.rank() != 3 || delta.shape()[0] != layer.out_channels) {
    throw InvalidArgument("BiasGrad: conv2d delta has shape " +
                          ShapeToString(delta.shape()));
  }
  const std::size_t plane = delta.shape()[1] * delta.shape()[2];
  Tensor g(layer.BiasShape());
  for (std::size_t c = 0; c < layer.out_channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) g[c] += delta[c * plane + i];
  }
  return g;
}

}  // namespace vbmask
