#pragma once

// Slow, literal reference implementations used to check the library.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "misr/member.hpp"
#include "misr/nn/tensor.hpp"
#include "misr/raster.hpp"
#include "misr/rng.hpp"

namespace oracle {

struct Score {
  double db = 0.0;
  int u = -1;
  int v = -1;
};

// 49-offset search written straight from the definitions: per offset crop,
// bias over clear pixels, bias-corrected MSE, PSNR with a 1e-10 floor.
inline Score cpsnr(const misr::Image& hr, const misr::QualityMask& mask, const misr::Image& sr) {
  const int n_w = hr.width() - 6;
  const int n_h = hr.height() - 6;
  Score best;
  best.db = -std::numeric_limits<double>::infinity();
  for (int v = 0; v <= 6; ++v) {
    for (int u = 0; u <= 6; ++u) {
      double diff_sum = 0;
      long count = 0;
      for (int y = 0; y < n_h; ++y)
        for (int x = 0; x < n_w; ++x)
          if (mask.clear(u + x, v + y)) {
            diff_sum += hr(u + x, v + y) - sr(3 + x, 3 + y);
            ++count;
          }
      if (count == 0) continue;
      const double b = diff_sum / static_cast<double>(count);
      double sq = 0;
      for (int y = 0; y < n_h; ++y)
        for (int x = 0; x < n_w; ++x)
          if (mask.clear(u + x, v + y)) {
            const double r = hr(u + x, v + y) - (sr(3 + x, 3 + y) + b);
            sq += r * r;
          }
      double mse = sq / static_cast<double>(count);
      if (mse < 1e-10) mse = 1e-10;
      const double db = -10.0 * std::log10(mse);
      if (db > best.db) best = Score{db, u, v};
    }
  }
  return best;
}

inline double keys(double t) {
  const double a = -0.5;
  t = std::fabs(t);
  if (t <= 1) return (a + 2) * t * t * t - (a + 3) * t * t + 1;
  if (t < 2) return a * t * t * t - 5 * a * t * t + 8 * a * t - 4 * a;
  return 0;
}

// Direct 2-d evaluation of the separable cubic convolution at one output
// pixel, without clamping.
inline double bicubic_at(const misr::Image& lr, int ox, int oy) {
  const double sx = (ox + 0.5) / 3.0 - 0.5;
  const double sy = (oy + 0.5) / 3.0 - 0.5;
  double acc = 0;
  for (int j = static_cast<int>(std::floor(sy)) - 1; j <= static_cast<int>(std::floor(sy)) + 2; ++j) {
    for (int i = static_cast<int>(std::floor(sx)) - 1; i <= static_cast<int>(std::floor(sx)) + 2; ++i) {
      const int ci = std::min(std::max(i, 0), lr.width() - 1);
      const int cj = std::min(std::max(j, 0), lr.height() - 1);
      acc += keys(sx - i) * keys(sy - j) * lr(ci, cj);
    }
  }
  return acc;
}

// Same-padded stride-1 cross-correlation, (N,Ci,H,W) * (Co,Ci,K,K).
template <class T>
misr::nn::Tensor<T> conv(const misr::nn::Tensor<T>& x, const misr::nn::Tensor<T>& w, const misr::nn::Tensor<T>& b) {
  using misr::nn::Shape;
  const int k = w.shape.h;
  const int p = k / 2;
  misr::nn::Tensor<T> y(Shape{x.shape.n, w.shape.n, x.shape.h, x.shape.w});
  for (int n = 0; n < x.shape.n; ++n)
    for (int co = 0; co < w.shape.n; ++co)
      for (int oy = 0; oy < x.shape.h; ++oy)
        for (int ox = 0; ox < x.shape.w; ++ox) {
          double acc = static_cast<double>(b.at(0, co, 0, 0));
          for (int ci = 0; ci < x.shape.c; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy + ky - p;
                const int ix = ox + kx - p;
                if (iy < 0 || ix < 0 || iy >= x.shape.h || ix >= x.shape.w) continue;
                acc += static_cast<double>(w.at(co, ci, ky, kx)) * static_cast<double>(x.at(n, ci, iy, ix));
              }
          y.at(n, co, oy, ox) = static_cast<T>(acc);
        }
  return y;
}

// Transposed convolution by scattering each input pixel through the kernel:
// y[co, s*iy - pad + ky, s*ix - pad + kx] += x[ci, iy, ix] * w[ci, co, ky, kx].
template <class T>
misr::nn::Tensor<T> deconv(const misr::nn::Tensor<T>& x, const misr::nn::Tensor<T>& w, const misr::nn::Tensor<T>& b,
                           int stride, int pad) {
  using misr::nn::Shape;
  const int k = w.shape.h;
  const int oh = (x.shape.h - 1) * stride - 2 * pad + k;
  const int ow = (x.shape.w - 1) * stride - 2 * pad + k;
  std::vector<double> acc(static_cast<std::size_t>(x.shape.n) * w.shape.c * oh * ow, 0.0);
  auto at = [&](int n, int c, int y, int xx) -> double& {
    return acc[((static_cast<std::size_t>(n) * w.shape.c + c) * oh + y) * ow + xx];
  };
  for (int n = 0; n < x.shape.n; ++n)
    for (int ci = 0; ci < x.shape.c; ++ci)
      for (int iy = 0; iy < x.shape.h; ++iy)
        for (int ix = 0; ix < x.shape.w; ++ix)
          for (int co = 0; co < w.shape.c; ++co)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int oy = stride * iy - pad + ky;
                const int ox = stride * ix - pad + kx;
                if (oy < 0 || ox < 0 || oy >= oh || ox >= ow) continue;
                at(n, co, oy, ox) += static_cast<double>(x.at(n, ci, iy, ix)) * static_cast<double>(w.at(ci, co, ky, kx));
              }
  misr::nn::Tensor<T> y(Shape{x.shape.n, w.shape.c, oh, ow});
  for (int n = 0; n < x.shape.n; ++n)
    for (int co = 0; co < w.shape.c; ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) y.at(n, co, oy, ox) = static_cast<T>(at(n, co, oy, ox) + static_cast<double>(b.at(0, co, 0, 0)));
  return y;
}

template <class T>
misr::nn::Tensor<T> random_tensor(misr::nn::Shape s, std::uint64_t seed, double scale = 1.0) {
  misr::Rng rng(seed);
  misr::nn::Tensor<T> t(s);
  for (auto& v : t.data) v = static_cast<T>(scale * rng.uniform(-1.0, 1.0));
  return t;
}

// Largest relative discrepancy between analytic and central-difference
// gradients of a scalar function of `param`. Entries where both are tiny are
// compared absolutely against `floor`.
inline double max_rel_error(std::vector<double>& param, const std::vector<double>& analytic,
                            const std::function<double()>& f, double h = 1e-5, double floor = 1e-8) {
  double worst = 0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double keep = param[i];
    param[i] = keep + h;
    const double fp = f();
    param[i] = keep - h;
    const double fm = f();
    param[i] = keep;
    const double numeric = (fp - fm) / (2 * h);
    const double scale = std::max({std::fabs(numeric), std::fabs(analytic[i]), floor});
    worst = std::max(worst, std::fabs(numeric - analytic[i]) / scale);
  }
  return worst;
}

inline misr::Image random_image(int w, int h, misr::Rng& rng) {
  std::vector<double> px(static_cast<std::size_t>(w) * h);
  for (auto& v : px) v = rng.uniform();
  return misr::Image(w, h, std::move(px));
}

// Mask with each pixel concealed with probability `p_concealed`.
inline misr::QualityMask random_mask(int w, int h, double p_concealed, misr::Rng& rng) {
  std::vector<std::uint8_t> s(static_cast<std::size_t>(w) * h);
  for (auto& v : s) v = rng.uniform() < p_concealed ? 0 : 1;
  return misr::QualityMask(w, h, std::move(s));
}

}  // namespace oracle
