#pragma once

// Multi-image super-resolution network.
//
//   5 x 128 x 128 LR stack
//   conv 5x5, 5 -> 128, ReLU
//   conv 3x3, 128 -> 64, ReLU
//   conv 3x3, 64 -> 9, ReLU
//   transposed conv 9x9, stride 3, pad 3, 9 -> 16, ReLU   (128 -> 384)
//   mean over the 16 channels -> 1 x 384 x 384
//
// The network is fully convolutional, so any H x W input maps to 3H x 3W;
// gradient checks use small inputs.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "misr/nn/layers.hpp"
#include "misr/nn/tensor.hpp"
#include "misr/rng.hpp"

namespace misr::nn {

inline constexpr int kInputChannels = 5;
inline constexpr int kConv1Out = 128;
inline constexpr int kConv1K = 5;
inline constexpr int kConv2Out = 64;
inline constexpr int kConv2K = 3;
inline constexpr int kConv3Out = 9;
inline constexpr int kConv3K = 3;
inline constexpr int kDeconvOut = 16;
inline constexpr int kDeconvK = 9;
inline constexpr int kDeconvStride = 3;
inline constexpr int kDeconvPad = 3;

/// Parameter tensors in declaration (and file) order.
template <class T>
struct NetworkParams {
  Tensor<T> conv1_w{Shape{kConv1Out, kInputChannels, kConv1K, kConv1K}};
  Tensor<T> conv1_b{Shape{1, kConv1Out, 1, 1}};
  Tensor<T> conv2_w{Shape{kConv2Out, kConv1Out, kConv2K, kConv2K}};
  Tensor<T> conv2_b{Shape{1, kConv2Out, 1, 1}};
  Tensor<T> conv3_w{Shape{kConv3Out, kConv2Out, kConv3K, kConv3K}};
  Tensor<T> conv3_b{Shape{1, kConv3Out, 1, 1}};
  Tensor<T> deconv_w{Shape{kConv3Out, kDeconvOut, kDeconvK, kDeconvK}};
  Tensor<T> deconv_b{Shape{1, kDeconvOut, 1, 1}};

  static constexpr std::array<const char*, 8> kNames = {"conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias",
                                                        "conv3.weight", "conv3.bias", "deconv.weight", "deconv.bias"};

  std::array<Tensor<T>*, 8> tensors() {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b, &deconv_w, &deconv_b};
  }
  std::array<const Tensor<T>*, 8> tensors() const {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b, &deconv_w, &deconv_b};
  }

  template <class U>
  NetworkParams<U> cast() const {
    NetworkParams<U> out;
    auto dst = out.tensors();
    auto src = tensors();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
    return out;
  }

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    auto ta = a.tensors();
    auto tb = b.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) {
      if (ta[i]->shape != tb[i]->shape || ta[i]->data != tb[i]->data) return false;
    }
    return true;
  }
};

/// Total number of trainable scalars.
template <class T>
std::size_t param_count(const NetworkParams<T>& p) {
  std::size_t n = 0;
  for (const auto* t : p.tensors()) n += t->size();
  return n;
}

/// He-style initialization: weights ~ N(0, 2 / fan_in), biases zero. For the
/// transposed convolution fan_in counts the taps reaching one output pixel,
/// Cin * (K / stride)^2.
template <class T>
NetworkParams<T> init_params(std::uint64_t seed) {
  NetworkParams<T> p;
  Rng rng(seed);
  const auto fill = [&rng](Tensor<T>& w, double fan_in) {
    const double sd = std::sqrt(2.0 / fan_in);
    for (T& v : w.data) v = static_cast<T>(sd * rng.normal());
  };
  fill(p.conv1_w, kInputChannels * kConv1K * kConv1K);
  fill(p.conv2_w, kConv1Out * kConv2K * kConv2K);
  fill(p.conv3_w, kConv2Out * kConv3K * kConv3K);
  const double taps = static_cast<double>(kDeconvK) / kDeconvStride;
  fill(p.deconv_w, kConv3Out * taps * taps);
  return p;
}

/// Intermediate activations kept for the backward pass.
template <class T>
struct Trace {
  Tensor<T> input;
  Tensor<T> h1;
  Tensor<T> h2;
  Tensor<T> h3;
  Tensor<T> up;
  Tensor<T> output;
};

template <class T>
Trace<T> forward_trace(const NetworkParams<T>& p, Tensor<T> x) {
  require_shape(x.shape.c == kInputChannels,
                "network expects " + std::to_string(kInputChannels) + " input channels, got " + std::to_string(x.shape.c));
  Trace<T> t;
  t.input = std::move(x);
  t.h1 = conv2d_forward(t.input, p.conv1_w, p.conv1_b);
  relu_inplace(t.h1);
  t.h2 = conv2d_forward(t.h1, p.conv2_w, p.conv2_b);
  relu_inplace(t.h2);
  t.h3 = conv2d_forward(t.h2, p.conv3_w, p.conv3_b);
  relu_inplace(t.h3);
  t.up = deconv2d_forward(t.h3, p.deconv_w, p.deconv_b, kDeconvStride, kDeconvPad);
  relu_inplace(t.up);
  t.output = channel_mean_forward(t.up);
  require_shape(t.h1.shape.h == t.input.shape.h && t.h3.shape.w == t.input.shape.w,
                "hidden layers must keep the input resolution");
  require_shape(t.output.shape.h == 3 * t.input.shape.h && t.output.shape.w == 3 * t.input.shape.w,
                "output must be three times the input resolution");
  return t;
}

/// (N,5,H,W) -> (N,1,3H,3W). No clamping.
template <class T>
Tensor<T> forward(const NetworkParams<T>& p, Tensor<T> x) {
  return forward_trace(p, std::move(x)).output;
}

/// Parameter gradients given dL/doutput.
template <class T>
NetworkParams<T> backward(const NetworkParams<T>& p, const Trace<T>& t, const Tensor<T>& d_output) {
  NetworkParams<T> g;
  Tensor<T> d_up = channel_mean_backward(t.up.shape, d_output);
  relu_backward_inplace(t.up, d_up);
  auto gd = deconv2d_backward(t.h3, p.deconv_w, d_up, kDeconvStride, kDeconvPad);
  g.deconv_w = std::move(gd.dw);
  g.deconv_b = std::move(gd.db);

  relu_backward_inplace(t.h3, gd.dx);
  auto g3 = conv2d_backward(t.h2, p.conv3_w, gd.dx);
  g.conv3_w = std::move(g3.dw);
  g.conv3_b = std::move(g3.db);

  relu_backward_inplace(t.h2, g3.dx);
  auto g2 = conv2d_backward(t.h1, p.conv2_w, g3.dx);
  g.conv2_w = std::move(g2.dw);
  g.conv2_b = std::move(g2.db);

  relu_backward_inplace(t.h1, g2.dx);
  auto g1 = conv2d_backward(t.input, p.conv1_w, g2.dx, /*need_dx=*/false);
  g.conv1_w = std::move(g1.dw);
  g.conv1_b = std::move(g1.db);
  return g;
}

}  // namespace misr::nn
