#pragma once

// Central-difference gradient checks for each network layer. Each check
// builds a scalar L = <r, layer(...)> with a fixed random r, compares the
// analytic gradients of L against finite differences and returns the worst
// relative error over sampled coordinates.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "misr/nn/layers.hpp"
#include "misr/nn/network.hpp"
#include "misr/rng.hpp"
#include "oracles.hpp"

namespace gradcheck {

using misr::nn::Shape;
using misr::nn::Tensor;

// Every function checked here is piecewise linear (or quadratic) in each
// single coordinate, so a fairly large step has no truncation error and keeps
// round-off small, as long as it does not cross a ReLU kink.
inline constexpr double kStep = 1e-4;

template <class T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a.data[i]) * static_cast<double>(b.data[i]);
  return s;
}

// Which ReLU units are active; a step that changes this crossed a kink.
using KinkPattern = std::function<std::vector<bool>()>;

// Worst relative error over up to `points` coordinates of `param`. When
// `kinks` is given, a step that flips any unit is retried ten times smaller.
template <class T>
double sampled_error(std::vector<T>& param, const std::vector<T>& analytic, const std::function<double()>& f,
                     std::size_t points, std::uint64_t seed, double h = kStep, double floor = 1e-8,
                     const KinkPattern& kinks = {}) {
  std::vector<std::size_t> idx;
  if (param.size() <= points) {
    for (std::size_t i = 0; i < param.size(); ++i) idx.push_back(i);
  } else {
    misr::Rng rng(seed);
    for (std::size_t i = 0; i < points; ++i) idx.push_back(static_cast<std::size_t>(rng.below(param.size())));
  }
  double worst = 0;
  for (std::size_t i : idx) {
    const T keep = param[i];
    double step = h;
    double numeric = 0;
    for (int attempt = 0; attempt < 4; ++attempt, step /= 10) {
      param[i] = static_cast<T>(static_cast<double>(keep) + step);
      const double fp = f();
      const auto kp = kinks ? kinks() : std::vector<bool>{};
      param[i] = static_cast<T>(static_cast<double>(keep) - step);
      const double fm = f();
      const auto km = kinks ? kinks() : std::vector<bool>{};
      numeric = (fp - fm) / (2 * step);
      if (kp == km) break;
    }
    param[i] = keep;
    const double a = static_cast<double>(analytic[i]);
    const double scale = std::max({std::fabs(numeric), std::fabs(a), floor});
    worst = std::max(worst, std::fabs(numeric - a) / scale);
  }
  return worst;
}

struct Result {
  std::string layer;
  double error = 0;
};

template <class T>
double conv(int cin, int cout, int k, int side, std::uint64_t seed, std::size_t points = 250, double h = kStep) {
  auto x = oracle::random_tensor<T>(Shape{2, cin, side, side}, seed);
  auto w = oracle::random_tensor<T>(Shape{cout, cin, k, k}, seed + 1, 1.0 / std::sqrt(cin * k * k));
  auto b = oracle::random_tensor<T>(Shape{1, cout, 1, 1}, seed + 2);
  const auto r = oracle::random_tensor<T>(Shape{2, cout, side, side}, seed + 3);
  const auto g = misr::nn::conv2d_backward(x, w, r);
  const auto f = [&] { return dot(r, misr::nn::conv2d_forward(x, w, b)); };
  return std::max({sampled_error(x.data, g.dx.data, f, points, seed, h), sampled_error(w.data, g.dw.data, f, points, seed, h),
                   sampled_error(b.data, g.db.data, f, points, seed, h)});
}

template <class T>
double deconv(int cin, int cout, int k, int stride, int pad, int side, std::uint64_t seed, std::size_t points = 250,
              double h = kStep) {
  auto x = oracle::random_tensor<T>(Shape{2, cin, side, side}, seed);
  auto w = oracle::random_tensor<T>(Shape{cin, cout, k, k}, seed + 1, 0.2);
  auto b = oracle::random_tensor<T>(Shape{1, cout, 1, 1}, seed + 2);
  const auto r = oracle::random_tensor<T>(Shape{2, cout, side * stride, side * stride}, seed + 3);
  const auto g = misr::nn::deconv2d_backward(x, w, r, stride, pad);
  const auto f = [&] { return dot(r, misr::nn::deconv2d_forward(x, w, b, stride, pad)); };
  return std::max({sampled_error(x.data, g.dx.data, f, points, seed, h), sampled_error(w.data, g.dw.data, f, points, seed, h),
                   sampled_error(b.data, g.db.data, f, points, seed, h)});
}

// Inputs are kept at least 0.1 away from the kink.
inline double relu(std::uint64_t seed) {
  auto x = oracle::random_tensor<double>(Shape{2, 3, 5, 5}, seed);
  for (double& v : x.data) v = v < 0 ? v - 0.1 : v + 0.1;
  const auto r = oracle::random_tensor<double>(x.shape, seed + 1);
  auto y = x;
  misr::nn::relu_inplace(y);
  auto dx = r;
  misr::nn::relu_backward_inplace(y, dx);
  const auto f = [&] {
    auto t = x;
    misr::nn::relu_inplace(t);
    return dot(r, t);
  };
  return sampled_error(x.data, dx.data, f, x.size(), seed);
}

inline double channel_mean(std::uint64_t seed) {
  auto x = oracle::random_tensor<double>(Shape{2, 16, 4, 4}, seed);
  const auto r = oracle::random_tensor<double>(Shape{2, 1, 4, 4}, seed + 1);
  const auto dx = misr::nn::channel_mean_backward(x.shape, r);
  const auto f = [&] { return dot(r, misr::nn::channel_mean_forward(x)); };
  return sampled_error(x.data, dx.data, f, x.size(), seed);
}

inline double masked_loss(std::uint64_t seed) {
  misr::Rng rng(seed);
  std::vector<double> pred(64), target(64);
  std::vector<std::uint8_t> mask(64);
  for (auto& v : pred) v = rng.uniform();
  for (auto& v : target) v = rng.uniform();
  for (auto& v : mask) v = rng.uniform() < 0.3 ? 0 : 1;
  const auto r = misr::nn::masked_mse_loss<double>(pred, target, mask);
  const auto f = [&] { return misr::nn::masked_mse_loss<double>(pred, target, mask)->loss; };
  return sampled_error(pred, r->grad, f, pred.size(), seed);
}

// The assembled network on a small input, sampling every parameter tensor.
inline double network(std::uint64_t seed, std::size_t points_per_tensor = 40) {
  auto p = misr::nn::init_params<double>(seed);
  misr::Rng rng(seed + 1);
  for (auto* t : p.tensors())
    if (t->shape.n == 1)
      for (double& v : t->data) v = 0.1 * rng.uniform();
  const auto x = oracle::random_tensor<double>(Shape{1, misr::nn::kInputChannels, 5, 5}, seed + 2);
  const auto r = oracle::random_tensor<double>(Shape{1, 1, 15, 15}, seed + 3);
  const auto trace = misr::nn::forward_trace(p, x);
  const auto g = misr::nn::backward(p, trace, r);
  misr::nn::Trace<double> last;
  const auto f = [&] {
    last = misr::nn::forward_trace(p, x);
    return dot(r, last.output);
  };
  const KinkPattern kinks = [&] {
    std::vector<bool> on;
    for (const auto* t : {&last.h1, &last.h2, &last.h3, &last.up})
      for (double v : t->data) on.push_back(v > 0);
    return on;
  };
  auto pt = p.tensors();
  auto gt = g.tensors();
  double worst = 0;
  for (std::size_t i = 0; i < pt.size(); ++i)
    worst = std::max(worst, sampled_error(pt[i]->data, gt[i]->data, f, points_per_tensor, seed + 10 + i, kStep, 1e-8, kinks));
  return worst;
}

// All checks at the network's layer shapes, in 64-bit.
inline std::vector<Result> all_layers(std::uint64_t seed = 17) {
  using namespace misr::nn;
  return {
      {"conv1", conv<double>(kInputChannels, kConv1Out, kConv1K, 6, seed)},
      {"conv2", conv<double>(kConv1Out, kConv2Out, kConv2K, 5, seed + 100)},
      {"conv3", conv<double>(kConv2Out, kConv3Out, kConv3K, 5, seed + 200)},
      {"deconv", deconv<double>(kConv3Out, kDeconvOut, kDeconvK, kDeconvStride, kDeconvPad, 4, seed + 300)},
      {"relu", relu(seed + 400)},
      {"channel mean", channel_mean(seed + 500)},
      {"masked loss", masked_loss(seed + 600)},
      {"network", network(seed + 700)},
  };
}

}  // namespace gradcheck
