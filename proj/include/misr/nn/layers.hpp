#pragma once

// Differentiable building blocks: same-padded convolution, strided transposed
// convolution, ReLU, channel mean and the masked MSE loss.
//
// All tensors are channels-last (see tensor.hpp). Convolutions lower to one
// GEMM per sample through an im2row patch matrix whose column p holds the
// K*K*C neighbourhood of pixel p in (ky, kx, c) order.
//
// Weight shapes: conv (Cout, Cin, K, K), transposed conv (Cin, Cout, K, K),
// biases (1, C, 1, 1).

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "misr/nn/tensor.hpp"

namespace misr::nn {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <class T>
using RowMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstRowMap = Eigen::Map<const RowMat<T>>;
template <class T>
using ColMap = Eigen::Map<ColMat<T>>;
template <class T>
using ConstColMap = Eigen::Map<const ColMat<T>>;

namespace detail {

template <class T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[3];
  return buffers[slot];
}

// Patch matrix of an H x W x C image for a K x K window at stride 1 with zero
// padding `pad`. Output has H*W columns of K*K*C entries each.
template <class T>
void im2row(const T* src, int h, int w, int c, int k, int pad, T* cols) {
  const std::size_t cs = static_cast<std::size_t>(c);
  const std::size_t patch = static_cast<std::size_t>(k) * k * cs;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      T* dst = cols + (static_cast<std::size_t>(y) * w + x) * patch;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = y + ky - pad;
        if (iy < 0 || iy >= h) {
          std::fill(dst, dst + static_cast<std::size_t>(k) * cs, T(0));
          dst += static_cast<std::size_t>(k) * cs;
          continue;
        }
        for (int kx = 0; kx < k; ++kx, dst += cs) {
          const int ix = x + kx - pad;
          if (ix < 0 || ix >= w) {
            std::fill(dst, dst + cs, T(0));
          } else {
            const T* from = src + (static_cast<std::size_t>(iy) * w + ix) * cs;
            std::copy(from, from + cs, dst);
          }
        }
      }
    }
  }
}

// Adjoint of im2row: accumulates patch entries back into the image.
template <class T>
void row2im_add(const T* cols, int h, int w, int c, int k, int pad, T* dst) {
  const std::size_t cs = static_cast<std::size_t>(c);
  const std::size_t patch = static_cast<std::size_t>(k) * k * cs;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T* src = cols + (static_cast<std::size_t>(y) * w + x) * patch;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = y + ky - pad;
        if (iy < 0 || iy >= h) {
          src += static_cast<std::size_t>(k) * cs;
          continue;
        }
        for (int kx = 0; kx < k; ++kx, src += cs) {
          const int ix = x + kx - pad;
          if (ix < 0 || ix >= w) continue;
          T* to = dst + (static_cast<std::size_t>(iy) * w + ix) * cs;
          for (std::size_t i = 0; i < cs; ++i) to[i] += src[i];
        }
      }
    }
  }
}

inline void check_conv(const Shape& x, const Shape& w, const Shape& b) {
  require_shape(w.h == w.w && w.h % 2 == 1, "conv2d: kernel must be square with odd size, got " + w.str());
  require_shape(x.c == w.c, "conv2d: input has " + std::to_string(x.c) + " channels, kernel expects " + std::to_string(w.c));
  require_shape(b == Shape{1, w.n, 1, 1}, "conv2d: bias shape " + b.str() + " does not match " + std::to_string(w.n) + " outputs");
}

// The transposed convolution is evaluated as stride*stride interleaved
// ordinary convolutions with an m x m kernel (m = K / stride). That
// decomposition tiles the output exactly when K = m*stride and
// 2*pad = stride*(m - 1), which gives output size stride * input size.
struct SubPixel {
  int stride;
  int m;
  int pad;  // padding of the equivalent m x m convolution
};

inline SubPixel check_deconv(const Shape& x, const Shape& w, const Shape& b, int stride, int pad) {
  require_shape(w.h == w.w, "deconv2d: kernel must be square, got " + w.str());
  require_shape(x.c == w.n, "deconv2d: input has " + std::to_string(x.c) + " channels, kernel expects " + std::to_string(w.n));
  require_shape(b == Shape{1, w.c, 1, 1}, "deconv2d: bias shape " + b.str() + " does not match " + std::to_string(w.c) + " outputs");
  require_shape(stride >= 1 && w.h % stride == 0 && 2 * pad == stride * (w.h / stride - 1),
                "deconv2d: unsupported kernel/stride/padding combination");
  const int m = w.h / stride;
  return SubPixel{stride, m, m - 1 - pad / stride};
}

// Rows (ry, rx, co), columns (ty, tx, ci) of the sub-pixel weight matrix.
template <class T>
std::size_t subpixel_weight_index(const Shape& ws, const SubPixel& sp, int ry, int rx, int co, int ty, int tx, int ci) {
  const int ky = sp.stride * (sp.m - 1 - ty) + ry;
  const int kx = sp.stride * (sp.m - 1 - tx) + rx;
  return ((static_cast<std::size_t>(ci) * ws.h + static_cast<std::size_t>(ky)) * ws.w + static_cast<std::size_t>(kx)) * ws.c +
         static_cast<std::size_t>(co);
}

template <class T>
RowMat<T> subpixel_weights(const Tensor<T>& weight, const SubPixel& sp) {
  const Shape& ws = weight.shape;
  const int cin = ws.n;
  const int cout = ws.c;
  RowMat<T> wall(sp.stride * sp.stride * cout, sp.m * sp.m * cin);
  for (int ry = 0; ry < sp.stride; ++ry)
    for (int rx = 0; rx < sp.stride; ++rx)
      for (int co = 0; co < cout; ++co)
        for (int ty = 0; ty < sp.m; ++ty)
          for (int tx = 0; tx < sp.m; ++tx)
            for (int ci = 0; ci < cin; ++ci) {
              wall((ry * sp.stride + rx) * cout + co, (ty * sp.m + tx) * cin + ci) =
                  weight.data[subpixel_weight_index<T>(ws, sp, ry, rx, co, ty, tx, ci)];
            }
  return wall;
}

}  // namespace detail

template <class T>
struct ConvGrads {
  Tensor<T> dx;  // empty when not requested
  Tensor<T> dw;
  Tensor<T> db;
};

/// Stride-1 cross-correlation with zero "same" padding.
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  detail::check_conv(x.shape, weight.shape, bias.shape);
  const int k = weight.shape.h;
  const int cout = weight.shape.n;
  const auto hw = static_cast<Eigen::Index>(x.shape.plane());
  const auto rows = static_cast<Eigen::Index>(k) * k * x.shape.c;
  Tensor<T> y(Shape{x.shape.n, cout, x.shape.h, x.shape.w});
  auto& cols = detail::scratch<T>(0);
  cols.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(hw));
  ConstRowMap<T> wm(weight.data.data(), cout, rows);
  ConstColMap<T> cm(cols.data(), rows, hw);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bv(bias.data.data(), cout);
  for (int i = 0; i < x.shape.n; ++i) {
    detail::im2row(x.sample(i), x.shape.h, x.shape.w, x.shape.c, k, k / 2, cols.data());
    ColMap<T> out(y.sample(i), cout, hw);
    out.noalias() = wm * cm;
    out.colwise() += bv;
  }
  return y;
}

/// Gradients of conv2d_forward given dL/dy. `need_dx` = false skips the
/// input gradient.
template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy, bool need_dx = true) {
  const int k = weight.shape.h;
  const int cout = weight.shape.n;
  require_shape(dy.shape == Shape{x.shape.n, cout, x.shape.h, x.shape.w}, "conv2d_backward: gradient shape mismatch");
  const auto hw = static_cast<Eigen::Index>(x.shape.plane());
  const auto rows = static_cast<Eigen::Index>(k) * k * x.shape.c;

  ConvGrads<T> g;
  g.dw = Tensor<T>(weight.shape);
  g.db = Tensor<T>(Shape{1, cout, 1, 1});
  auto& cols = detail::scratch<T>(0);
  cols.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(hw));
  RowMap<T> dwm(g.dw.data.data(), cout, rows);
  for (int i = 0; i < x.shape.n; ++i) {
    detail::im2row(x.sample(i), x.shape.h, x.shape.w, x.shape.c, k, k / 2, cols.data());
    ConstColMap<T> dys(dy.sample(i), cout, hw);
    dwm.noalias() += dys * ConstColMap<T>(cols.data(), rows, hw).transpose();
    const T* d = dy.sample(i);
    for (Eigen::Index j = 0; j < hw; ++j, d += cout)
      for (int co = 0; co < cout; ++co) g.db.data[static_cast<std::size_t>(co)] += d[co];
  }
  // The input gradient is a same-padded correlation of dy with the
  // spatially flipped, channel-transposed kernel.
  if (need_dx) {
    const int cin = x.shape.c;
    Tensor<T> flipped(Shape{cin, cout, k, k});
    for (int co = 0; co < cout; ++co)
      for (int ci = 0; ci < cin; ++ci)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) flipped.at(ci, co, k - 1 - ky, k - 1 - kx) = weight.at(co, ci, ky, kx);
    g.dx = conv2d_forward(dy, flipped, Tensor<T>(Shape{1, cin, 1, 1}));
  }
  return g;
}

/// Transposed convolution: output size (H-1)*stride - 2*pad + K, which the
/// supported configurations make equal to stride*H.
template <class T>
Tensor<T> deconv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride, int pad) {
  const auto sp = detail::check_deconv(x.shape, weight.shape, bias.shape, stride, pad);
  const int cin = x.shape.c;
  const int cout = weight.shape.c;
  const int oh = x.shape.h * stride;
  const int ow = x.shape.w * stride;
  const auto hw = static_cast<Eigen::Index>(x.shape.plane());
  const auto rows = static_cast<Eigen::Index>(sp.m) * sp.m * cin;
  const auto outs = static_cast<Eigen::Index>(stride) * stride * cout;
  const RowMat<T> wall = detail::subpixel_weights(weight, sp);

  Tensor<T> y(Shape{x.shape.n, cout, oh, ow});
  auto& cols = detail::scratch<T>(0);
  auto& phases = detail::scratch<T>(2);
  cols.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(hw));
  phases.resize(static_cast<std::size_t>(outs) * static_cast<std::size_t>(hw));
  const std::size_t cs = static_cast<std::size_t>(cout);
  for (int i = 0; i < x.shape.n; ++i) {
    detail::im2row(x.sample(i), x.shape.h, x.shape.w, cin, sp.m, sp.pad, cols.data());
    ColMap<T>(phases.data(), outs, hw).noalias() = wall * ConstColMap<T>(cols.data(), rows, hw);
    T* out = y.sample(i);
    for (int qy = 0; qy < x.shape.h; ++qy) {
      for (int qx = 0; qx < x.shape.w; ++qx) {
        const T* src = phases.data() + (static_cast<std::size_t>(qy) * x.shape.w + qx) * static_cast<std::size_t>(outs);
        for (int ry = 0; ry < stride; ++ry) {
          for (int rx = 0; rx < stride; ++rx, src += cs) {
            T* dst = out + (static_cast<std::size_t>(stride * qy + ry) * ow + static_cast<std::size_t>(stride * qx + rx)) * cs;
            for (std::size_t c = 0; c < cs; ++c) dst[c] = src[c] + bias.data[c];
          }
        }
      }
    }
  }
  return y;
}

template <class T>
ConvGrads<T> deconv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy, int stride, int pad,
                               bool need_dx = true) {
  const auto sp = detail::check_deconv(x.shape, weight.shape, Shape{1, weight.shape.c, 1, 1}, stride, pad);
  const int cin = x.shape.c;
  const int cout = weight.shape.c;
  const int ow = x.shape.w * stride;
  require_shape(dy.shape == Shape{x.shape.n, cout, x.shape.h * stride, ow}, "deconv2d_backward: gradient shape mismatch");
  const auto hw = static_cast<Eigen::Index>(x.shape.plane());
  const auto rows = static_cast<Eigen::Index>(sp.m) * sp.m * cin;
  const auto outs = static_cast<Eigen::Index>(stride) * stride * cout;
  const RowMat<T> wall = detail::subpixel_weights(weight, sp);
  RowMat<T> dwall = RowMat<T>::Zero(outs, rows);

  ConvGrads<T> g;
  g.dw = Tensor<T>(weight.shape);
  g.db = Tensor<T>(Shape{1, cout, 1, 1});
  if (need_dx) g.dx = Tensor<T>(x.shape);
  auto& cols = detail::scratch<T>(0);
  auto& dcols = detail::scratch<T>(1);
  auto& phases = detail::scratch<T>(2);
  cols.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(hw));
  if (need_dx) dcols.resize(cols.size());
  phases.resize(static_cast<std::size_t>(outs) * static_cast<std::size_t>(hw));
  const std::size_t cs = static_cast<std::size_t>(cout);
  for (int i = 0; i < x.shape.n; ++i) {
    const T* dys = dy.sample(i);
    for (int qy = 0; qy < x.shape.h; ++qy) {
      for (int qx = 0; qx < x.shape.w; ++qx) {
        T* dst = phases.data() + (static_cast<std::size_t>(qy) * x.shape.w + qx) * static_cast<std::size_t>(outs);
        for (int ry = 0; ry < stride; ++ry) {
          for (int rx = 0; rx < stride; ++rx, dst += cs) {
            const T* src = dys + (static_cast<std::size_t>(stride * qy + ry) * ow + static_cast<std::size_t>(stride * qx + rx)) * cs;
            for (std::size_t c = 0; c < cs; ++c) {
              dst[c] = src[c];
              g.db.data[c] += src[c];
            }
          }
        }
      }
    }
    ConstColMap<T> pm(phases.data(), outs, hw);
    detail::im2row(x.sample(i), x.shape.h, x.shape.w, cin, sp.m, sp.pad, cols.data());
    dwall.noalias() += pm * ConstColMap<T>(cols.data(), rows, hw).transpose();
    if (need_dx) {
      ColMap<T>(dcols.data(), rows, hw).noalias() = wall.transpose() * pm;
      detail::row2im_add(dcols.data(), x.shape.h, x.shape.w, cin, sp.m, sp.pad, g.dx.sample(i));
    }
  }
  for (int ry = 0; ry < stride; ++ry)
    for (int rx = 0; rx < stride; ++rx)
      for (int co = 0; co < cout; ++co)
        for (int ty = 0; ty < sp.m; ++ty)
          for (int tx = 0; tx < sp.m; ++tx)
            for (int ci = 0; ci < cin; ++ci) {
              g.dw.data[detail::subpixel_weight_index<T>(weight.shape, sp, ry, rx, co, ty, tx, ci)] =
                  dwall((ry * stride + rx) * cout + co, (ty * sp.m + tx) * cin + ci);
            }
  return g;
}

template <class T>
void relu_inplace(Tensor<T>& x) {
  for (T& v : x.data) v = v > T(0) ? v : T(0);
}

/// dL/dx from dL/dy using the ReLU output y.
template <class T>
void relu_backward_inplace(const Tensor<T>& y, Tensor<T>& dy) {
  for (std::size_t i = 0; i < dy.data.size(); ++i) {
    if (!(y.data[i] > T(0))) dy.data[i] = T(0);
  }
}

/// Mean over channels: (N,C,H,W) -> (N,1,H,W).
template <class T>
Tensor<T> channel_mean_forward(const Tensor<T>& x) {
  Tensor<T> y(Shape{x.shape.n, 1, x.shape.h, x.shape.w});
  const std::size_t cs = static_cast<std::size_t>(x.shape.c);
  const T inv = T(1) / static_cast<T>(x.shape.c);
  const std::size_t pixels = static_cast<std::size_t>(x.shape.n) * x.shape.plane();
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* src = x.data.data() + p * cs;
    T s = 0;
    for (std::size_t c = 0; c < cs; ++c) s += src[c];
    y.data[p] = s * inv;
  }
  return y;
}

template <class T>
Tensor<T> channel_mean_backward(const Shape& x_shape, const Tensor<T>& dy) {
  Tensor<T> dx(x_shape);
  const std::size_t cs = static_cast<std::size_t>(x_shape.c);
  const T inv = T(1) / static_cast<T>(x_shape.c);
  for (std::size_t p = 0; p < dy.data.size(); ++p) {
    std::fill(dx.data.begin() + static_cast<std::ptrdiff_t>(p * cs),
              dx.data.begin() + static_cast<std::ptrdiff_t>((p + 1) * cs), dy.data[p] * inv);
  }
  return dx;
}

template <class T>
struct LossResult {
  double loss = 0.0;
  std::vector<T> grad;  // dL/dpred
  std::size_t counted = 0;
};

/// Mean squared residual over clear target pixels (all pixels when `mask`
/// is empty). Returns nullopt when no pixel counts.
template <class T>
std::optional<LossResult<T>> masked_mse_loss(std::span<const T> pred, std::span<const T> target,
                                             std::span<const std::uint8_t> mask) {
  require_shape(pred.size() == target.size(), "masked_mse_loss: prediction/target size mismatch");
  require_shape(mask.empty() || mask.size() == pred.size(), "masked_mse_loss: mask size mismatch");
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) n += mask.empty() || mask[i] ? 1 : 0;
  if (n == 0) return std::nullopt;
  LossResult<T> r;
  r.counted = n;
  r.grad.assign(pred.size(), T(0));
  const double inv = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += d * d;
    r.grad[i] = static_cast<T>(2.0 * d * inv);
  }
  r.loss = sum * inv;
  return r;
}

}  // namespace misr::nn
