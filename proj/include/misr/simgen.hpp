#pragma once

// Synthetic scenes and acquisitions with known shifts, biases, noise and
// clouds.
//
// Seeds: every derived stream uses mix_seed(parent, stream) from rng.hpp.
// Stream numbers are fixed constants below, so (seed -> output) is stable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "misr/assembly.hpp"
#include "misr/error.hpp"
#include "misr/member.hpp"
#include "misr/metric.hpp"
#include "misr/raster.hpp"
#include "misr/resample.hpp"
#include "misr/rng.hpp"

namespace misr {

struct AcquisitionParams {
  double dx = 0.0;  // HR pixels, |dx| <= 3
  double dy = 0.0;
  double brightness_bias = 0.0;
  double noise_sigma = 0.0;
  double cloud_fraction = 0.0;
  double drift_amplitude = 0.0;

  static AcquisitionParams identity() { return {}; }
};

/// Ranges from which gen_member draws acquisition parameters.
struct ParamsDistribution {
  double shift_max = 2.0;
  double bias_max = 0.05;
  double noise_min = 0.03;
  double noise_max = 0.06;
  double lr_cloud_prob = 0.3;
  double lr_cloud_max = 0.35;
  double hr_cloud_prob = 0.25;
  double hr_cloud_max = 0.2;
  double drift_max = 0.01;

  static ParamsDistribution identity() {
    return ParamsDistribution{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  }
};

namespace sim {

inline constexpr std::uint64_t kStreamScene = 1;
inline constexpr std::uint64_t kStreamBand = 2;
inline constexpr std::uint64_t kStreamDrift = 3;
inline constexpr std::uint64_t kStreamNoise = 4;
inline constexpr std::uint64_t kStreamCloud = 5;
inline constexpr std::uint64_t kStreamParams = 6;
inline constexpr std::uint64_t kStreamHr = 7;
inline constexpr std::uint64_t kStreamAcq = 8;
inline constexpr std::uint64_t kStreamTile = 9;
inline constexpr double kCloudFill = 0.9;
inline constexpr int kMaxRetries = 16;

inline double lattice(std::uint64_t seed, std::int64_t i, std::int64_t j) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ull ^
                                                       static_cast<std::uint64_t>(j) * 0xC2B2AE3D27D4EB4Full));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

inline double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

/// Value noise in [-1,1] with the given lattice spacing (pixels).
inline std::vector<double> value_noise(std::uint64_t seed, int width, int height, double spacing) {
  std::vector<double> out(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    const double fy = y / spacing;
    const auto j = static_cast<std::int64_t>(std::floor(fy));
    const double ty = fade(fy - static_cast<double>(j));
    for (int x = 0; x < width; ++x) {
      const double fx = x / spacing;
      const auto i = static_cast<std::int64_t>(std::floor(fx));
      const double tx = fade(fx - static_cast<double>(i));
      const double a = lattice(seed, i, j) + tx * (lattice(seed, i + 1, j) - lattice(seed, i, j));
      const double b = lattice(seed, i, j + 1) + tx * (lattice(seed, i + 1, j + 1) - lattice(seed, i, j + 1));
      out[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] = a + ty * (b - a);
    }
  }
  return out;
}

/// Octave sum of value noise, roughly in [-2,2].
inline std::vector<double> fractal_noise(std::uint64_t seed, int width, int height, double base_spacing, int octaves) {
  std::vector<double> acc(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0);
  double amp = 1.0;
  double spacing = base_spacing;
  for (int o = 0; o < octaves; ++o) {
    const auto layer = value_noise(mix_seed(seed, static_cast<std::uint64_t>(o)), width, height, spacing);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += amp * layer[k];
    amp *= 0.5;
    spacing *= 0.5;
  }
  return acc;
}

inline void normalize_into(std::vector<double>& v, double lo, double hi) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double a = *mn;
  const double span = *mx - a;
  for (double& x : v) x = span > 0 ? lo + (hi - lo) * (x - a) / span : 0.5 * (lo + hi);
}

// Bilinear sample of buf at (x + dx, y + dy) with replicated edges.
inline std::vector<double> translate(const std::vector<double>& buf, int width, int height, double dx, double dy) {
  const auto at = [&](int x, int y) {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return buf[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  };
  const int ix = static_cast<int>(std::floor(dx));
  const int iy = static_cast<int>(std::floor(dy));
  const double fx = dx - ix;
  const double fy = dy - iy;
  std::vector<double> out(buf.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int sx = x + ix;
      const int sy = y + iy;
      double v = at(sx, sy);
      if (fx != 0.0 || fy != 0.0) {
        v = (1 - fy) * ((1 - fx) * at(sx, sy) + fx * at(sx + 1, sy)) + fy * ((1 - fx) * at(sx, sy + 1) + fx * at(sx + 1, sy + 1));
      }
      out[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] = v;
    }
  }
  return out;
}

// Mask whose concealed set is the top `fraction` of a smooth noise field.
inline QualityMask cloud_mask(std::uint64_t seed, int width, int height, double fraction) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const auto concealed = static_cast<std::size_t>(std::llround(std::clamp(fraction, 0.0, 1.0) * static_cast<double>(n)));
  std::vector<std::uint8_t> states(n, 1);
  if (concealed == 0) return QualityMask(width, height, std::move(states));
  const auto field = fractal_noise(seed, width, height, std::max(width, height) / 4.0, 3);
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return field[a] > field[b]; });
  for (std::size_t k = 0; k < concealed; ++k) states[order[k]] = 0;
  return QualityMask(width, height, std::move(states));
}

// Overwrites concealed pixels with bright values near 0.9.
inline void paint_clouds(std::vector<double>& px, const QualityMask& mask, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t k = 0; k < px.size(); ++k) {
    if (!mask.states()[k]) px[k] = std::clamp(kCloudFill + 0.02 * rng.normal(), 0.0, 1.0);
  }
}

inline std::vector<double> blockmean_buffer(const std::vector<double>& px, int width, int height) {
  std::vector<double> clamped(px);
  for (double& v : clamped) v = std::clamp(v, 0.0, 1.0);
  const Image img(width, height, std::move(clamped));
  const Image down = blockmean_downscale_x3(img);
  return std::vector<double>(down.pixels().begin(), down.pixels().end());
}

inline std::string tile_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tile%04zu", index);
  return buf;
}

}  // namespace sim

/// Procedural landscape: smooth noise octaves plus a river, field patches and
/// a terrain step, normalized into [0.05, 0.95].
inline Image gen_hr_scene(std::uint64_t seed, int size = kHrSize) {
  if (size <= 0 || size % kScale != 0) throw ConfigError("gen_hr_scene: size must be a positive multiple of 3");
  const std::uint64_t s = mix_seed(seed, sim::kStreamScene);
  auto px = sim::fractal_noise(s, size, size, size / 3.0, 5);
  Rng rng(mix_seed(s, 100));

  // Terrain step along a random line.
  {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double nx = std::cos(angle);
    const double ny = std::sin(angle);
    const double cx = rng.uniform(0.3, 0.7) * size;
    const double cy = rng.uniform(0.3, 0.7) * size;
    const double step = rng.uniform(0.4, 0.8) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        if (nx * (x - cx) + ny * (y - cy) > 0) px[static_cast<std::size_t>(y) * size + static_cast<std::size_t>(x)] += step;
      }
    }
  }
  // Field patches.
  const int fields = 2 + static_cast<int>(rng.below(3));
  for (int f = 0; f < fields; ++f) {
    const int w = static_cast<int>(rng.uniform(0.1, 0.3) * size);
    const int h = static_cast<int>(rng.uniform(0.1, 0.3) * size);
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size - w)));
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size - h)));
    const double delta = rng.uniform(-0.6, 0.6);
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) px[static_cast<std::size_t>(y) * size + static_cast<std::size_t>(x)] += delta;
    }
  }
  // River: a dark meandering band.
  {
    const double y0 = rng.uniform(0.2, 0.8) * size;
    const double amp = rng.uniform(0.05, 0.15) * size;
    const double period = rng.uniform(0.5, 1.5) * size;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double half_width = rng.uniform(2.0, 6.0);
    const bool vertical = rng.uniform() < 0.5;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double along = vertical ? y : x;
        const double across = vertical ? x : y;
        const double centre = y0 + amp * std::sin(2.0 * std::numbers::pi * along / period + phase);
        if (std::abs(across - centre) < half_width) px[static_cast<std::size_t>(y) * size + static_cast<std::size_t>(x)] = -2.5;
      }
    }
  }
  sim::normalize_into(px, 0.05, 0.95);
  return Image(size, size, std::move(px));
}

/// Simulates one LR acquisition of an HR scene. Pipeline: drift, sub-pixel
/// translation (bilinear, replicate edges), 3x3 block mean, brightness bias,
/// Gaussian noise, clamp, clouds.
inline std::pair<Image, QualityMask> acquire_lr(const Image& hr, const AcquisitionParams& p, std::uint64_t seed) {
  if (std::abs(p.dx) > kBorder || std::abs(p.dy) > kBorder) throw ConfigError("acquire_lr: shift outside [-3,3]");
  if (p.noise_sigma < 0 || p.drift_amplitude < 0 || p.cloud_fraction < 0 || p.cloud_fraction > 1) {
    throw ConfigError("acquire_lr: parameter out of range");
  }
  if (hr.width() % kScale != 0 || hr.height() % kScale != 0) throw DimensionError("acquire_lr: HR size not divisible by 3");
  const int w = hr.width();
  const int h = hr.height();
  std::vector<double> px(hr.pixels().begin(), hr.pixels().end());

  if (p.drift_amplitude > 0) {
    const auto d = sim::fractal_noise(mix_seed(seed, sim::kStreamDrift), w, h, w / 6.0, 2);
    for (std::size_t k = 0; k < px.size(); ++k) px[k] += p.drift_amplitude * d[k];
  }
  if (p.dx != 0.0 || p.dy != 0.0) px = sim::translate(px, w, h, p.dx, p.dy);
  auto lr = sim::blockmean_buffer(px, w, h);
  const int lw = w / kScale;
  const int lh = h / kScale;

  if (p.brightness_bias != 0.0) {
    for (double& v : lr) v += p.brightness_bias;
  }
  if (p.noise_sigma > 0) {
    Rng rng(mix_seed(seed, sim::kStreamNoise));
    for (double& v : lr) v += p.noise_sigma * rng.normal();
  }
  for (double& v : lr) v = std::clamp(v, 0.0, 1.0);

  QualityMask mask = sim::cloud_mask(mix_seed(seed, sim::kStreamCloud), lw, lh, p.cloud_fraction);
  sim::paint_clouds(lr, mask, mix_seed(seed, sim::kStreamCloud + 100));
  return {Image(lw, lh, std::move(lr)), std::move(mask)};
}

namespace sim {

inline AcquisitionParams draw_params(Rng& rng, const ParamsDistribution& d) {
  AcquisitionParams p;
  p.dx = rng.uniform(-d.shift_max, d.shift_max);
  p.dy = rng.uniform(-d.shift_max, d.shift_max);
  p.brightness_bias = rng.uniform(-d.bias_max, d.bias_max);
  p.noise_sigma = rng.uniform(d.noise_min, d.noise_max);
  p.cloud_fraction = rng.uniform() < d.lr_cloud_prob ? rng.uniform(0.0, d.lr_cloud_max) : 0.0;
  p.drift_amplitude = rng.uniform(0.0, d.drift_max);
  return p;
}

// Builds a member from a fixed truth scene.
inline DataMember member_from_scene(const Image& scene, std::uint64_t seed, int n_lr, const ParamsDistribution& d,
                                    Band band, std::string tile_id, const Thresholds& t = {}) {
  if (n_lr < t.min_lr_count) {
    throw GenerationError("gen_member: n_lr = " + std::to_string(n_lr) + " is below the minimum of " +
                          std::to_string(t.min_lr_count));
  }
  if (d.shift_max > kBorder) throw ConfigError("gen_member: shift_max exceeds the registration window");

  DataMember m;
  m.band = band;
  m.tile_id = std::move(tile_id);

  // HR target: the scene itself, optionally clouded.
  {
    Rng rng(mix_seed(seed, kStreamHr));
    bool ok = false;
    for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
      const double frac = rng.uniform() < d.hr_cloud_prob ? rng.uniform(0.0, d.hr_cloud_max) : 0.0;
      QualityMask mask = cloud_mask(mix_seed(seed, kStreamHr + 1000 + static_cast<std::uint64_t>(attempt)),
                                    scene.width(), scene.height(), frac);
      if (!clearance_of(mask).at_least(t.hr_min)) continue;
      std::vector<double> px(scene.pixels().begin(), scene.pixels().end());
      paint_clouds(px, mask, mix_seed(seed, kStreamHr + 2000));
      m.hr = Image(scene.width(), scene.height(), std::move(px));
      m.hr_mask = std::move(mask);
      ok = true;
    }
    if (!ok) throw GenerationError("gen_member: HR clearance constraint unsatisfiable after retries");
  }

  for (int i = 0; i < n_lr; ++i) {
    const std::uint64_t acq_seed = mix_seed(mix_seed(seed, kStreamAcq), static_cast<std::uint64_t>(i));
    Rng rng(mix_seed(acq_seed, kStreamParams));
    bool ok = false;
    for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
      const AcquisitionParams p = draw_params(rng, d);
      auto [img, mask] = acquire_lr(scene, p, mix_seed(acq_seed, static_cast<std::uint64_t>(attempt)));
      if (!clearance_of(mask).at_least(t.lr_min)) continue;
      m.lr_list.push_back(LowRes{std::move(img), std::move(mask), i});
      ok = true;
    }
    if (!ok) throw GenerationError("gen_member: LR clearance constraint unsatisfiable after retries");
  }
  return m;
}

}  // namespace sim

/// One synthetic member with n_lr acquisitions drawn from `dist`.
inline DataMember gen_member(std::uint64_t seed, int n_lr, const ParamsDistribution& dist = {},
                             Band band = Band::Red, std::string tile_id = "tile0000") {
  const Image scene = gen_hr_scene(mix_seed(seed, sim::kStreamTile));
  return sim::member_from_scene(scene, seed, n_lr, dist, band, std::move(tile_id));
}

/// n_members members over ceil(n/2) tiles; each tile yields a RED and a NIR
/// member that share geography but not acquisitions.
inline Dataset gen_dataset(std::uint64_t seed, std::size_t n_members, int n_lr = kMinLrCount,
                           const ParamsDistribution& dist = {}) {
  if (n_members == 0) throw ConfigError("gen_dataset: member count must be positive");
  Dataset ds;
  ds.provenance = "synthetic seed " + std::to_string(seed);
  const std::size_t tiles = (n_members + 1) / 2;
  for (std::size_t t = 0; t < tiles; ++t) {
    const std::uint64_t tile_seed = mix_seed(mix_seed(seed, sim::kStreamTile), t);
    const Image base = gen_hr_scene(tile_seed);
    for (Band band : {Band::Red, Band::Nir}) {
      if (ds.members.size() == n_members) break;
      const std::uint64_t band_seed = mix_seed(tile_seed, band == Band::Red ? 0 : 1);
      Image scene = base;
      if (band == Band::Nir) {
        // NIR: same geography, different radiometry.
        auto extra = sim::fractal_noise(mix_seed(band_seed, sim::kStreamBand), base.width(), base.height(), 64.0, 3);
        std::vector<double> px(base.pixels().begin(), base.pixels().end());
        for (std::size_t k = 0; k < px.size(); ++k) px[k] = 1.0 - 0.8 * px[k] + 0.1 * extra[k];
        sim::normalize_into(px, 0.05, 0.95);
        scene = Image(base.width(), base.height(), std::move(px));
      }
      ds.members.push_back(sim::member_from_scene(scene, band_seed, n_lr, dist, band, sim::tile_name(t)));
    }
  }
  return ds;
}

}  // namespace misr
