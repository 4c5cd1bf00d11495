#pragma once

// Deterministic x3 resampling.
//
// bicubic_upscale_x3: separable Keys cubic convolution (a = -0.5) on a
// center-aligned grid, output x samples source coordinate (x + 0.5) / 3 - 0.5,
// edges replicate, result clamped to [0,1].
//
// blockmean_downscale_x3: mean of each disjoint 3x3 block. Inputs must have
// dimensions divisible by 3, so no padding is ever needed.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "misr/error.hpp"
#include "misr/raster.hpp"

namespace misr {

inline constexpr int kScale = 3;
inline constexpr double kKeysA = -0.5;

/// Keys cubic convolution kernel.
constexpr double keys_kernel(double t, double a = kKeysA) noexcept {
  const double x = t < 0 ? -t : t;
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace detail {

struct CubicTaps {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};

// Taps for each output position along one axis of length n_src * 3.
inline std::vector<CubicTaps> cubic_taps_x3(int n_src) {
  std::vector<CubicTaps> taps(static_cast<std::size_t>(n_src) * kScale);
  for (int x = 0; x < n_src * kScale; ++x) {
    const double s = (x + 0.5) / kScale - 0.5;
    const int base = static_cast<int>(std::floor(s));
    auto& t = taps[static_cast<std::size_t>(x)];
    for (int k = 0; k < 4; ++k) {
      const int j = base - 1 + k;
      t.index[static_cast<std::size_t>(k)] = j < 0 ? 0 : (j >= n_src ? n_src - 1 : j);
      t.weight[static_cast<std::size_t>(k)] = keys_kernel(s - j);
    }
  }
  return taps;
}

// Weighted sum expressed relative to the second tap. Since the weights sum
// to one this equals the plain weighted sum, and constant inputs come back
// bit-exact.
inline double apply_taps(const CubicTaps& t, const double* src, std::size_t stride) noexcept {
  const double ref = src[static_cast<std::size_t>(t.index[1]) * stride];
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    acc += t.weight[static_cast<std::size_t>(k)] * (src[static_cast<std::size_t>(t.index[static_cast<std::size_t>(k)]) * stride] - ref);
  }
  return ref + acc;
}

}  // namespace detail

/// x3 bicubic upscale (any non-empty input; 128x128 -> 384x384 in practice).
inline Image bicubic_upscale_x3(const Image& lr) {
  if (lr.empty()) throw DimensionError("bicubic_upscale_x3: empty input");
  const int w = lr.width();
  const int h = lr.height();
  const int ow = w * kScale;
  const int oh = h * kScale;
  const auto tx = detail::cubic_taps_x3(w);
  const auto ty = detail::cubic_taps_x3(h);

  // Horizontal pass: h rows x ow columns.
  std::vector<double> tmp(static_cast<std::size_t>(h) * static_cast<std::size_t>(ow));
  const double* src = lr.pixels().data();
  for (int y = 0; y < h; ++y) {
    const double* row = src + static_cast<std::size_t>(y) * static_cast<std::size_t>(w);
    double* out = tmp.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(ow);
    for (int x = 0; x < ow; ++x) out[x] = detail::apply_taps(tx[static_cast<std::size_t>(x)], row, 1);
  }
  // Vertical pass.
  std::vector<double> out(static_cast<std::size_t>(oh) * static_cast<std::size_t>(ow));
  for (int y = 0; y < oh; ++y) {
    const auto& t = ty[static_cast<std::size_t>(y)];
    double* dst = out.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(ow);
    for (int x = 0; x < ow; ++x) {
      dst[x] = detail::apply_taps(t, tmp.data() + x, static_cast<std::size_t>(ow));
    }
  }
  return Image::clamped(ow, oh, std::move(out));
}

/// x3 local-mean downscale. Each output pixel is the mean of its 3x3 block.
inline Image blockmean_downscale_x3(const Image& hr) {
  if (hr.empty() || hr.width() % kScale != 0 || hr.height() % kScale != 0) {
    throw DimensionError("blockmean_downscale_x3: dimensions " + std::to_string(hr.width()) + "x" +
                         std::to_string(hr.height()) + " are not divisible by 3");
  }
  const int ow = hr.width() / kScale;
  const int oh = hr.height() / kScale;
  std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double ref = hr(kScale * x, kScale * y);
      // Neumaier-compensated sum of deviations from the block's first pixel.
      double sum = 0.0;
      double comp = 0.0;
      for (int dy = 0; dy < kScale; ++dy) {
        for (int dx = 0; dx < kScale; ++dx) {
          const double d = hr(kScale * x + dx, kScale * y + dy) - ref;
          const double t = sum + d;
          comp += std::abs(sum) >= std::abs(d) ? (sum - t) + d : (d - t) + sum;
          sum = t;
        }
      }
      out[static_cast<std::size_t>(y) * static_cast<std::size_t>(ow) + static_cast<std::size_t>(x)] =
          ref + (sum + comp) / (kScale * kScale);
    }
  }
  return Image::clamped(ow, oh, std::move(out));
}

}  // namespace misr
