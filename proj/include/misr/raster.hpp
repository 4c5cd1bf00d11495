#pragma once

// Single-band rasters and quality masks.
//
// Intensities are doubles in [0,1], row-major, decoded from 16-bit integers
// as raw / 65535. Masks store one byte per pixel: 1 = clear, 0 = concealed.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "misr/error.hpp"

namespace misr {

inline constexpr double kRawScale = 65535.0;

/// Immutable single-band image with intensities in [0,1].
class Image {
 public:
  Image() = default;

  /// Takes ownership of `pixels` (row-major). Throws DomainError if any value
  /// is outside [0,1] or not finite, DimensionError on a size mismatch.
  Image(int width, int height, std::vector<double> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 0 || height < 0 ||
        pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw DimensionError("image buffer size does not match " + std::to_string(width) + "x" +
                           std::to_string(height));
    }
    for (double v : pixels_) {
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("image intensity outside [0,1]");
    }
  }

  /// Constant-valued image.
  static Image filled(int width, int height, double value) {
    return Image(width, height,
                 std::vector<double>(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), value));
  }

  /// Builds an image from arbitrary reals, clamping into [0,1].
  static Image clamped(int width, int height, std::vector<double> pixels) {
    for (double& v : pixels) v = std::clamp(v, 0.0, 1.0);
    return Image(width, height, std::move(pixels));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double operator()(int x, int y) const noexcept {
    return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
  }
  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<const double> row(int y) const noexcept {
    return std::span<const double>(pixels_).subspan(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_),
                                                    static_cast<std::size_t>(width_));
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

/// Immutable clear/concealed bitmap.
class QualityMask {
 public:
  QualityMask() = default;

  /// Any nonzero entry is clear.
  QualityMask(int width, int height, std::vector<std::uint8_t> states)
      : width_(width), height_(height), clear_(std::move(states)) {
    if (width < 0 || height < 0 ||
        clear_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw DimensionError("mask buffer size does not match " + std::to_string(width) + "x" +
                           std::to_string(height));
    }
    for (auto& s : clear_) s = s != 0 ? 1 : 0;
  }

  static QualityMask all_clear(int width, int height) {
    return QualityMask(width, height,
                       std::vector<std::uint8_t>(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 1));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return clear_.size(); }
  bool empty() const noexcept { return clear_.empty(); }

  bool clear(int x, int y) const noexcept {
    return clear_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)] != 0;
  }
  std::span<const std::uint8_t> states() const noexcept { return clear_; }
  std::span<const std::uint8_t> row(int y) const noexcept {
    return std::span<const std::uint8_t>(clear_).subspan(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_),
                                                         static_cast<std::size_t>(width_));
  }

  std::size_t clear_count() const noexcept {
    return static_cast<std::size_t>(std::count(clear_.begin(), clear_.end(), std::uint8_t{1}));
  }

  friend bool operator==(const QualityMask&, const QualityMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> clear_;
};

template <class A, class B>
bool same_dims(const A& a, const B& b) noexcept {
  return a.width() == b.width() && a.height() == b.height();
}

/// Exact rational num/den used for threshold comparisons.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  /// Rounds a decimal threshold to a denominator of 10^6.
  static Ratio from_decimal(double value) {
    if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("threshold outside [0,1]");
    return Ratio{static_cast<std::uint64_t>(value * 1'000'000.0 + 0.5), 1'000'000};
  }
  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Clear-pixel count over total pixel count. Compared exactly.
struct Clearance {
  std::uint64_t clear = 0;
  std::uint64_t total = 1;

  double value() const noexcept { return static_cast<double>(clear) / static_cast<double>(total); }

  bool at_least(Ratio r) const noexcept {
    return static_cast<unsigned __int128>(clear) * r.den >= static_cast<unsigned __int128>(r.num) * total;
  }

  friend std::strong_ordering operator<=>(const Clearance& a, const Clearance& b) noexcept {
    const auto lhs = static_cast<unsigned __int128>(a.clear) * b.total;
    const auto rhs = static_cast<unsigned __int128>(b.clear) * a.total;
    return lhs <=> rhs;
  }
  friend bool operator==(const Clearance& a, const Clearance& b) noexcept { return (a <=> b) == 0; }
};

inline Clearance clearance_of(const QualityMask& mask) {
  if (mask.empty()) throw DimensionError("clearance of an empty mask");
  return Clearance{mask.clear_count(), mask.size()};
}

/// Fraction of clear pixels.
inline double clearance(const QualityMask& mask) { return clearance_of(mask).value(); }

namespace detail {

inline void check_crop(int width, int height, int u, int v, int w, int h) {
  if (u < 0 || v < 0 || w < 0 || h < 0 || u + w > width || v + h > height) {
    throw BoundsError("crop (" + std::to_string(u) + "," + std::to_string(v) + "," + std::to_string(w) + "," +
                      std::to_string(h) + ") exceeds " + std::to_string(width) + "x" + std::to_string(height));
  }
}

template <class T>
std::vector<T> crop_buffer(std::span<const T> src, int width, int u, int v, int w, int h) {
  std::vector<T> out(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    const auto* from = src.data() + static_cast<std::size_t>(v + y) * static_cast<std::size_t>(width) + u;
    std::copy(from, from + w, out.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  return out;
}

}  // namespace detail

/// Sub-image with upper-left corner (u,v) and size w x h.
inline Image crop(const Image& img, int u, int v, int w, int h) {
  detail::check_crop(img.width(), img.height(), u, v, w, h);
  return Image(w, h, detail::crop_buffer(img.pixels(), img.width(), u, v, w, h));
}

inline QualityMask crop(const QualityMask& mask, int u, int v, int w, int h) {
  detail::check_crop(mask.width(), mask.height(), u, v, w, h);
  return QualityMask(w, h, detail::crop_buffer(mask.states(), mask.width(), u, v, w, h));
}

}  // namespace misr
