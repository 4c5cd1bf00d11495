#pragma once

// Dataset construction guided by clearance.
//
// A tile becomes a DataMember when, after dropping LR images below 0.6
// clearance and HR images below 0.75, at least nine LR images and one HR image
// remain. Thresholds are compared as exact rationals.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "misr/error.hpp"
#include "misr/member.hpp"
#include "misr/png_io.hpp"
#include "misr/raster.hpp"
#include "misr/resample.hpp"
#include "misr/rng.hpp"

namespace misr {

struct Thresholds {
  Ratio lr_min{3, 5};
  Ratio hr_min{3, 4};
  int min_lr_count = kMinLrCount;
};

struct HrCandidate {
  Image image;
  QualityMask mask;
};

namespace rule {
inline constexpr const char* kMinLrCount = "min LR count";
inline constexpr const char* kHrClearance = "HR clearance";
}  // namespace rule

/// Rule-based refusal of a tile. Not an error: most tiles fail cleanly.
struct Rejection {
  std::string rule;
  std::string detail;
};

using Admission = std::variant<DataMember, Rejection>;

/// Index of the HR target: highest clearance, ties broken by the smallest
/// mean pixelwise MSE between the block-mean downscaled HR and each LR image
/// (all pixels, no mask, no bias), remaining ties by lowest index.
inline std::size_t select_hr(const std::vector<HrCandidate>& hrs, const std::vector<Image>& lrs) {
  if (hrs.empty() || lrs.empty()) throw StructuralError("select_hr: empty candidate list");
  Clearance top = clearance_of(hrs.front().mask);
  for (const auto& c : hrs) top = std::max(top, clearance_of(c.mask));

  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < hrs.size(); ++i) {
    if (clearance_of(hrs[i].mask) == top) tied.push_back(i);
  }
  if (tied.size() == 1) return tied.front();

  std::size_t best = tied.front();
  double best_err = 0.0;
  bool first = true;
  for (std::size_t i : tied) {
    const Image down = blockmean_downscale_x3(hrs[i].image);
    double err = 0.0;
    for (const auto& lr : lrs) {
      if (!same_dims(down, lr)) throw StructuralError("select_hr: LR size does not match the downscaled HR");
      double sq = 0.0;
      for (std::size_t k = 0; k < lr.size(); ++k) {
        const double d = down.pixels()[k] - lr.pixels()[k];
        sq += d * d;
      }
      err += sq / static_cast<double>(lr.size());
    }
    err /= static_cast<double>(lrs.size());
    if (first || err < best_err) {
      best = i;
      best_err = err;
      first = false;
    }
  }
  return best;
}

/// Applies the clearance and count rules to one tile's candidates.
inline Admission admit_member(std::vector<HrCandidate> candidate_hrs, std::vector<LowRes> candidate_lrs, Band band,
                              std::string tile_id, const Thresholds& t = {}) {
  for (const auto& c : candidate_hrs) {
    if (c.image.width() != kHrSize || c.image.height() != kHrSize || !same_dims(c.image, c.mask)) {
      throw StructuralError("admit_member: HR candidate of tile " + tile_id + " is not 384x384 with a matching mask");
    }
  }
  for (const auto& c : candidate_lrs) {
    if (c.image.width() != kLrSize || c.image.height() != kLrSize || !same_dims(c.image, c.mask)) {
      throw StructuralError("admit_member: LR candidate of tile " + tile_id + " is not 128x128 with a matching mask");
    }
  }

  std::vector<LowRes> lrs;
  for (auto& c : candidate_lrs) {
    if (clearance_of(c.mask).at_least(t.lr_min)) lrs.push_back(std::move(c));
  }
  std::vector<HrCandidate> hrs;
  for (auto& c : candidate_hrs) {
    if (clearance_of(c.mask).at_least(t.hr_min)) hrs.push_back(std::move(c));
  }

  if (static_cast<int>(lrs.size()) < t.min_lr_count) {
    return Rejection{rule::kMinLrCount, std::to_string(lrs.size()) + " LR images pass the clearance threshold, " +
                                            std::to_string(t.min_lr_count) + " required"};
  }
  if (hrs.empty()) {
    return Rejection{rule::kHrClearance, "no HR image reaches the clearance threshold"};
  }

  std::vector<Image> lr_images;
  lr_images.reserve(lrs.size());
  for (const auto& l : lrs) lr_images.push_back(l.image);
  const std::size_t pick = select_hr(hrs, lr_images);

  DataMember m;
  m.band = band;
  m.tile_id = std::move(tile_id);
  m.hr = std::move(hrs[pick].image);
  m.hr_mask = std::move(hrs[pick].mask);
  m.lr_list = std::move(lrs);
  return m;
}

/// Indices of the n clearest LR images: clearance descending, ties by
/// ascending acquisition index. This order is the network's channel order.
inline std::vector<std::size_t> select_clearest(const DataMember& member, std::size_t n = 5) {
  if (n > member.lr_list.size()) {
    throw StructuralError("select_clearest: requested " + std::to_string(n) + " of " +
                          std::to_string(member.lr_list.size()) + " LR images");
  }
  std::vector<std::size_t> idx(member.lr_list.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<Clearance> c;
  c.reserve(idx.size());
  for (const auto& lr : member.lr_list) c.push_back(clearance_of(lr.mask));
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (c[a] != c[b]) return c[a] > c[b];
    return member.lr_list[a].acquisition_index < member.lr_list[b].acquisition_index;
  });
  idx.resize(n);
  return idx;
}

struct Dataset {
  std::vector<DataMember> members;
  std::string provenance;
};

/// Throws StructuralError when (band, tile_id) repeats or a member breaks
/// the admission invariants.
inline void validate(const Dataset& ds, const Thresholds& t = {}) {
  std::set<std::string> seen;
  for (const auto& m : ds.members) {
    if (!seen.insert(m.id()).second) throw StructuralError("duplicate member " + m.id());
    if (static_cast<int>(m.lr_list.size()) < t.min_lr_count) throw StructuralError(m.id() + ": too few LR images");
    if (!clearance_of(m.hr_mask).at_least(t.hr_min)) throw StructuralError(m.id() + ": HR clearance below threshold");
    for (const auto& lr : m.lr_list) {
      if (!clearance_of(lr.mask).at_least(t.lr_min)) throw StructuralError(m.id() + ": LR clearance below threshold");
    }
  }
}

struct SplitConfig {
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
};

/// Per-member test flag. Members sharing a tile id move together: tiles are
/// taken in sorted order, shuffled with the seed, and whole tiles go to the
/// test side until it holds at least round(test_fraction * total) members.
inline std::vector<bool> split_assignment(const std::vector<std::string>& tile_ids, const SplitConfig& cfg) {
  if (tile_ids.empty()) throw ConfigError("split: empty dataset");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) throw ConfigError("split: test_fraction must be in (0,1)");
  const std::size_t total = tile_ids.size();
  const auto target = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(total)));
  if (target == 0) throw ConfigError("split: test_fraction leaves the test side empty");

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < total; ++i) groups[tile_ids[i]].push_back(i);
  std::vector<const std::vector<std::size_t>*> order;
  order.reserve(groups.size());
  for (const auto& [tile, members] : groups) order.push_back(&members);
  Rng rng(cfg.seed);
  rng.shuffle(std::span(order));

  std::vector<bool> is_test(total, false);
  std::size_t taken = 0;
  for (const auto* g : order) {
    if (taken >= target) break;
    for (std::size_t i : *g) is_test[i] = true;
    taken += g->size();
  }
  if (taken >= total) throw ConfigError("split: test_fraction leaves the training side empty");
  return is_test;
}

/// Returns (train, test).
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, const SplitConfig& cfg) {
  std::vector<std::string> tiles;
  tiles.reserve(ds.members.size());
  for (const auto& m : ds.members) tiles.push_back(m.tile_id);
  const auto is_test = split_assignment(tiles, cfg);
  Dataset train{{}, ds.provenance + " [train]"};
  Dataset test{{}, ds.provenance + " [test]"};
  for (std::size_t i = 0; i < ds.members.size(); ++i) {
    (is_test[i] ? test : train).members.push_back(ds.members[i]);
  }
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Directory ingestion.
//
//   <root>/<BAND>/<tile_id>/HR.png, SM.png        single HR candidate
//                          HR<k>.png, SM<k>.png   or several, paired by k
//                          LR<k>.png, QM<k>.png   LR images, paired by k
//
// The numeric suffix k of an LR file is its acquisition index.

struct TileFiles {
  Band band = Band::Red;
  std::string tile_id;
  std::filesystem::path dir;
  std::vector<std::pair<std::string, std::string>> hr;  // (image, mask)
  std::vector<std::pair<std::string, std::string>> lr;  // (image, mask)
  std::vector<int> acquisition;
};

namespace detail {

inline std::optional<int> numbered(const std::string& name, const std::string& prefix) {
  if (name.size() <= prefix.size() + 4 || name.rfind(prefix, 0) != 0 || !name.ends_with(".png")) return std::nullopt;
  const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - 4);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return value;
}

inline void require_file(const std::filesystem::path& p) {
  if (!std::filesystem::is_regular_file(p)) throw IoError("missing file " + p.string());
}

}  // namespace detail

/// Lists the files of one tile directory. Throws IoError naming the first
/// missing partner file.
inline TileFiles scan_tile(const std::filesystem::path& dir, Band band) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("missing directory " + dir.string());
  TileFiles t;
  t.band = band;
  t.tile_id = dir.filename().string();
  t.dir = dir;

  std::map<int, std::string> lr_files;
  std::map<int, std::string> hr_files;
  bool plain_hr = false;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name == "HR.png") plain_hr = true;
    if (auto k = detail::numbered(name, "LR")) lr_files[*k] = name;
    if (auto k = detail::numbered(name, "HR")) hr_files[*k] = name;
  }
  if (plain_hr) {
    detail::require_file(dir / "SM.png");
    t.hr.emplace_back("HR.png", "SM.png");
  }
  for (const auto& [k, name] : hr_files) {
    const std::string mask = "SM" + name.substr(2);
    detail::require_file(dir / mask);
    t.hr.emplace_back(name, mask);
  }
  for (const auto& [k, name] : lr_files) {
    const std::string mask = "QM" + name.substr(2);
    detail::require_file(dir / mask);
    t.lr.emplace_back(name, mask);
    t.acquisition.push_back(k);
  }
  if (t.hr.empty()) throw IoError("missing file " + (dir / "HR.png").string());
  return t;
}

/// All tile directories under root, ordered by band then tile id.
inline std::vector<TileFiles> scan_root(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("missing directory " + root.string());
  std::vector<TileFiles> out;
  for (Band band : {Band::Red, Band::Nir}) {
    const fs::path band_dir = root / std::string(to_string(band));
    if (!fs::is_directory(band_dir)) continue;
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(band_dir)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) out.push_back(scan_tile(d, band));
  }
  return out;
}

/// Writes a member in the ingestion layout under <root>/<BAND>/<tile_id>/.
inline std::filesystem::path write_member(const std::filesystem::path& root, const DataMember& m) {
  namespace fs = std::filesystem;
  const fs::path dir = root / std::string(to_string(m.band)) / m.tile_id;
  fs::create_directories(dir);
  save_image(dir / "HR.png", m.hr);
  save_mask(dir / "SM.png", m.hr_mask);
  for (const auto& lr : m.lr_list) {
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "%03d", lr.acquisition_index);
    save_image(dir / ("LR" + std::string(suffix) + ".png"), lr.image);
    save_mask(dir / ("QM" + std::string(suffix) + ".png"), lr.mask);
  }
  return dir;
}

}  // namespace misr
