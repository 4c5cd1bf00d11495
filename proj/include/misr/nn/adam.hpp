#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace misr::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments over a fixed list of parameter blocks.
template <class T>
class Adam {
 public:
  Adam(std::vector<std::size_t> block_sizes, AdamConfig cfg = {}) : cfg_(cfg) {
    for (std::size_t n : block_sizes) {
      m_.emplace_back(n, 0.0);
      v_.emplace_back(n, 0.0);
    }
  }

  /// One update. `params[i]` and `grads[i]` must have the sizes given at
  /// construction.
  void step(std::span<const std::span<T>> params, std::span<const std::span<const T>> grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t b = 0; b < m_.size(); ++b) {
      auto& m = m_[b];
      auto& v = v_[b];
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double g = static_cast<double>(grads[b][i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        params[b][i] = static_cast<T>(static_cast<double>(params[b][i]) - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  long steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

}  // namespace misr::nn
