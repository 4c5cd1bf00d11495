#pragma once

// Training loop and inference helpers.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "misr/assembly.hpp"
#include "misr/metric.hpp"
#include "misr/nn/adam.hpp"
#include "misr/nn/network.hpp"
#include "misr/rng.hpp"

namespace misr::nn {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 4;
  double lr_initial = 1e-3;
  double lr_final = 7.666e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool mask_loss = true;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be positive");
    if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
    if (!(lr_initial > 0 && lr_final > 0)) throw ConfigError("train: learning rates must be positive");
    if (!(lr_final < lr_initial)) throw ConfigError("train: lr_final must be below lr_initial");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0)) {
      throw ConfigError("train: invalid Adam hyper-parameters");
    }
  }
};

/// Per-epoch exponential decay, lr(0) = lr_initial, lr(epochs-1) = lr_final.
inline double learning_rate(const TrainConfig& cfg, int epoch) {
  if (cfg.epochs == 1) return cfg.lr_initial;
  const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
  return cfg.lr_initial * std::pow(cfg.lr_final / cfg.lr_initial, frac);
}

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_cpsnr = std::numeric_limits<double>::quiet_NaN();
  std::size_t skipped = 0;  // samples without clear target pixels
};

struct TrainResult {
  NetworkParams<float> params;
  std::vector<EpochStats> history;
};

/// The five clearest LR images stacked as channels, (1,5,H,W).
inline Tensor<float> input_stack(const DataMember& m) {
  const auto picks = select_clearest(m, kInputChannels);
  const Image& first = m.lr_list[picks.front()].image;
  Tensor<float> x(Shape{1, kInputChannels, first.height(), first.width()});
  for (int c = 0; c < kInputChannels; ++c) {
    const Image& img = m.lr_list[picks[static_cast<std::size_t>(c)]].image;
    if (!same_dims(img, first)) throw ShapeError("input_stack: LR images differ in size");
    float* dst = x.sample(0) + c;
    for (std::size_t k = 0; k < img.size(); ++k) dst[k * kInputChannels] = static_cast<float>(img.pixels()[k]);
  }
  return x;
}

/// Network output for a member, clamped into [0,1].
inline Image super_resolve(const NetworkParams<float>& p, const DataMember& m) {
  const Tensor<float> y = forward(p, input_stack(m));
  std::vector<double> px(y.data.begin(), y.data.end());
  return Image::clamped(y.shape.w, y.shape.h, std::move(px));
}

inline double mean_network_cpsnr(const NetworkParams<float>& p, const std::vector<DataMember>& members) {
  if (members.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& m : members) sum += cpsnr(m.hr, m.hr_mask, super_resolve(p, m)).cpsnr;
  return sum / static_cast<double>(members.size());
}

struct TrainSample {
  Tensor<float> input;
  std::vector<float> target;
  std::vector<std::uint8_t> mask;  // empty when the loss is unmasked
};

inline TrainSample make_sample(const DataMember& m, bool mask_loss) {
  TrainSample s;
  s.input = input_stack(m);
  s.target.assign(m.hr.pixels().begin(), m.hr.pixels().end());
  if (mask_loss) s.mask.assign(m.hr_mask.states().begin(), m.hr_mask.states().end());
  return s;
}

/// Mean masked loss of `p` over samples, skipping those without clear pixels.
inline double mean_loss(const NetworkParams<float>& p, const std::vector<TrainSample>& samples) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    const Tensor<float> y = forward(p, s.input);
    const auto r = masked_mse_loss<float>(y.data, s.target, s.mask);
    if (!r) continue;
    sum += r->loss;
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch Adam on the masked MSE. Batches come from a seeded shuffle per
/// epoch; the batch gradient is the mean of per-sample gradients.
inline TrainResult train(const Dataset& ds_train, const TrainConfig& cfg, const Dataset* ds_val = nullptr,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (ds_train.members.empty()) throw ConfigError("train: empty training set");

  std::vector<TrainSample> samples;
  samples.reserve(ds_train.members.size());
  for (const auto& m : ds_train.members) samples.push_back(make_sample(m, cfg.mask_loss));
  const Shape in_shape = samples.front().input.shape;
  for (const auto& s : samples) {
    if (s.input.shape != in_shape) throw ShapeError("train: members differ in LR size");
  }

  TrainResult result;
  result.params = init_params<float>(mix_seed(cfg.seed, 1));
  std::vector<std::size_t> sizes;
  for (const auto* t : result.params.tensors()) sizes.push_back(t->size());
  Adam<float> adam(sizes, AdamConfig{cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});

  std::vector<std::size_t> order(samples.size());
  Rng shuffler(mix_seed(cfg.seed, 2));
  const std::size_t out_plane = in_shape.plane() * 9;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = learning_rate(cfg, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffler.shuffle(std::span(order));

    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const int batch = static_cast<int>(end - start);
      Tensor<float> x(Shape{batch, in_shape.c, in_shape.h, in_shape.w});
      for (int b = 0; b < batch; ++b) {
        const auto& src = samples[order[start + static_cast<std::size_t>(b)]].input.data;
        std::copy(src.begin(), src.end(), x.sample(b));
      }
      const Trace<float> trace = forward_trace(result.params, std::move(x));

      Tensor<float> d_out(trace.output.shape);
      std::vector<LossResult<float>> losses;
      for (int b = 0; b < batch; ++b) {
        const auto& s = samples[order[start + static_cast<std::size_t>(b)]];
        auto r = masked_mse_loss<float>(std::span<const float>(trace.output.sample(b), out_plane), s.target, s.mask);
        if (!r) {
          ++stats.skipped;
          continue;
        }
        if (!std::isfinite(r->loss)) throw DivergenceError(epoch, "non-finite loss");
        loss_sum += r->loss;
        ++loss_n;
        std::copy(r->grad.begin(), r->grad.end(), d_out.sample(b));
        losses.push_back(std::move(*r));
      }
      if (losses.empty()) continue;
      const float scale = 1.0f / static_cast<float>(losses.size());
      for (float& g : d_out.data) g *= scale;

      const NetworkParams<float> grads = backward(result.params, trace, d_out);
      std::vector<std::span<float>> pspans;
      std::vector<std::span<const float>> gspans;
      auto pt = result.params.tensors();
      auto gt = grads.tensors();
      for (std::size_t i = 0; i < pt.size(); ++i) {
        if (!gt[i]->all_finite()) throw DivergenceError(epoch, "non-finite gradient");
        pspans.emplace_back(pt[i]->data);
        gspans.emplace_back(gt[i]->data);
      }
      adam.step(pspans, gspans, stats.lr);
    }
    stats.train_loss = loss_n > 0 ? loss_sum / static_cast<double>(loss_n) : std::numeric_limits<double>::quiet_NaN();
    if (loss_n > 0 && !std::isfinite(stats.train_loss)) throw DivergenceError(epoch, "non-finite epoch loss");
    if (ds_val != nullptr && !ds_val->members.empty()) stats.val_cpsnr = mean_network_cpsnr(result.params, ds_val->members);
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

inline void write_history_csv(std::ostream& out, const std::vector<EpochStats>& history) {
  out << "epoch,lr,train_loss,val_cpsnr\n";
  out.precision(17);
  for (const auto& h : history) {
    out << h.epoch << ',' << h.lr << ',' << h.train_loss << ',';
    if (std::isfinite(h.val_cpsnr)) out << h.val_cpsnr;
    out << '\n';
  }
}

}  // namespace misr::nn
