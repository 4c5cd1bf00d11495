#pragma once

// Clear-pixel, bias-corrected PSNR with a +-3 pixel registration search.
//
// For every offset (u,v) in {0..6}^2 the HR image and its mask are cropped at
// (u,v) and compared with the SR image's center crop at (3,3):
//   b    = mean over clear pixels of (HR - SR)
//   MSE  = mean over clear pixels of (HR - (SR + b))^2
//   PSNR = -10 log10(max(MSE, 1e-10))
// cPSNR is the maximum PSNR over the offsets. Ties keep the smallest v, then
// the smallest u. Offsets without any clear pixel are skipped.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "misr/error.hpp"
#include "misr/member.hpp"
#include "misr/raster.hpp"
#include "misr/resample.hpp"

namespace misr {

inline constexpr int kBorder = 3;
inline constexpr int kOffsets = 2 * kBorder + 1;
inline constexpr double kMseFloor = 1e-10;

struct Offset {
  int u = 0;
  int v = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

struct ScoredPair {
  double cpsnr = 0.0;
  Offset best_offset;
  double bias_at_best = 0.0;
  double mse_at_best = 0.0;
};

namespace detail {

inline void check_triple(const Image& hr, const Image& sr, const QualityMask& mask) {
  if (!same_dims(hr, sr) || !same_dims(hr, mask)) throw DimensionError("metric inputs must share dimensions");
}

}  // namespace detail

/// Mean of HR - SR over clear pixels.
inline double bias(const Image& hr_crop, const Image& sr_crop, const QualityMask& mask_crop) {
  detail::check_triple(hr_crop, sr_crop, mask_crop);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < hr_crop.size(); ++i) {
    if (mask_crop.states()[i]) {
      sum += hr_crop.pixels()[i] - sr_crop.pixels()[i];
      ++n;
    }
  }
  if (n == 0) throw EmptyClearError("bias: no clear pixels");
  return sum / static_cast<double>(n);
}

/// Bias-corrected mean square error over clear pixels.
inline double clear_mse(const Image& hr_crop, const Image& sr_crop, const QualityMask& mask_crop) {
  const double b = bias(hr_crop, sr_crop, mask_crop);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < hr_crop.size(); ++i) {
    if (mask_crop.states()[i]) {
      const double r = hr_crop.pixels()[i] - (sr_crop.pixels()[i] + b);
      sum += r * r;
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

/// PSNR in dB for intensities in [0,1]; capped at 100 dB by the MSE floor.
inline double psnr(double mse) {
  if (!(mse >= 0.0)) throw DomainError("psnr: negative or NaN mse");
  return -10.0 * std::log10(std::max(mse, kMseFloor));
}

/// Registration-searched clear PSNR. Any size larger than 2*border works;
/// the crops are (W-6) x (H-6).
inline ScoredPair cpsnr(const Image& hr, const QualityMask& hr_mask, const Image& sr) {
  detail::check_triple(hr, sr, hr_mask);
  const int w = hr.width() - 2 * kBorder;
  const int h = hr.height() - 2 * kBorder;
  if (w <= 0 || h <= 0) throw DimensionError("cpsnr: image too small for a 3 pixel border");

  const std::size_t stride = static_cast<std::size_t>(hr.width());
  const double* hr_px = hr.pixels().data();
  const double* sr_px = sr.pixels().data();
  const std::uint8_t* clear = hr_mask.states().data();

  bool found = false;
  ScoredPair best;
  for (int v = 0; v < kOffsets; ++v) {
    for (int u = 0; u < kOffsets; ++u) {
      double sum = 0.0;
      std::size_t n = 0;
      for (int y = 0; y < h; ++y) {
        const std::size_t hr_row = static_cast<std::size_t>(y + v) * stride + static_cast<std::size_t>(u);
        const std::size_t sr_row = static_cast<std::size_t>(y + kBorder) * stride + kBorder;
        for (int x = 0; x < w; ++x) {
          if (clear[hr_row + static_cast<std::size_t>(x)]) {
            sum += hr_px[hr_row + static_cast<std::size_t>(x)] - sr_px[sr_row + static_cast<std::size_t>(x)];
            ++n;
          }
        }
      }
      if (n == 0) continue;
      const double b = sum / static_cast<double>(n);
      double sq = 0.0;
      for (int y = 0; y < h; ++y) {
        const std::size_t hr_row = static_cast<std::size_t>(y + v) * stride + static_cast<std::size_t>(u);
        const std::size_t sr_row = static_cast<std::size_t>(y + kBorder) * stride + kBorder;
        for (int x = 0; x < w; ++x) {
          if (clear[hr_row + static_cast<std::size_t>(x)]) {
            const double r = hr_px[hr_row + static_cast<std::size_t>(x)] - (sr_px[sr_row + static_cast<std::size_t>(x)] + b);
            sq += r * r;
          }
        }
      }
      const double mse = sq / static_cast<double>(n);
      const double score = psnr(mse);
      if (!found || score > best.cpsnr) {
        best = ScoredPair{score, Offset{u, v}, b, mse};
        found = true;
      }
    }
  }
  if (!found) throw EmptyClearError("cpsnr: every registration offset has zero clear pixels");
  return best;
}

/// Indices of the LR images whose clearance equals the member maximum.
inline std::vector<std::size_t> max_clearance_indices(const DataMember& member) {
  std::vector<std::size_t> out;
  if (member.lr_list.empty()) return out;
  Clearance top = clearance_of(member.lr_list.front().mask);
  for (const auto& lr : member.lr_list) top = std::max(top, clearance_of(lr.mask));
  for (std::size_t i = 0; i < member.lr_list.size(); ++i) {
    if (clearance_of(member.lr_list[i].mask) == top) out.push_back(i);
  }
  return out;
}

/// Mean cPSNR of the bicubic upscales of every maximum-clearance LR image.
inline double baseline_score(const DataMember& member) {
  const auto picks = max_clearance_indices(member);
  if (picks.empty()) throw StructuralError("baseline_score: member has no LR images");
  double sum = 0.0;
  for (std::size_t i : picks) {
    sum += cpsnr(member.hr, member.hr_mask, bicubic_upscale_x3(member.lr_list[i].image)).cpsnr;
  }
  return sum / static_cast<double>(picks.size());
}

}  // namespace misr
