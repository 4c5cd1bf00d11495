#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "misr/error.hpp"

namespace misr::nn {

/// (batch, channels, height, width).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  std::size_t sample() const noexcept { return static_cast<std::size_t>(c) * plane(); }
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense 4-d array with logical shape (N, C, H, W) stored channels-last:
/// element (n, c, y, x) lives at ((n*H + y)*W + x)*C + c. Weights use the
/// same rule, so a conv kernel (Cout, Cin, K, K) is laid out (Cout, K, K, Cin).
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.count(), fill) {}

  std::size_t size() const noexcept { return data.size(); }
  T* sample(int i) noexcept { return data.data() + static_cast<std::size_t>(i) * shape.sample(); }
  const T* sample(int i) const noexcept { return data.data() + static_cast<std::size_t>(i) * shape.sample(); }

  std::size_t index(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape.h + static_cast<std::size_t>(y)) * shape.w + static_cast<std::size_t>(x)) *
               shape.c +
           static_cast<std::size_t>(c);
  }
  T& at(int n, int c, int y, int x) noexcept { return data[index(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const noexcept { return data[index(n, c, y, x)]; }

  void zero() { std::fill(data.begin(), data.end(), T(0)); }

  bool all_finite() const noexcept {
    return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    std::transform(data.begin(), data.end(), out.data.begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace misr::nn
