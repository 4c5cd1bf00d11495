#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "misr/error.hpp"
#include "misr/raster.hpp"

namespace misr {

inline constexpr int kLrSize = 128;
inline constexpr int kHrSize = 384;
inline constexpr int kMinLrCount = 9;

enum class Band { Red, Nir };

inline std::string_view to_string(Band b) noexcept { return b == Band::Red ? "RED" : "NIR"; }

inline std::optional<Band> parse_band(std::string_view s) noexcept {
  if (s == "RED") return Band::Red;
  if (s == "NIR") return Band::Nir;
  return std::nullopt;
}

/// One low-resolution acquisition.
struct LowRes {
  Image image;
  QualityMask mask;
  int acquisition_index = 0;
};

/// One scene: a single HR target with its mask plus the admitted LR set.
struct DataMember {
  Band band = Band::Red;
  std::string tile_id;
  Image hr;
  QualityMask hr_mask;
  std::vector<LowRes> lr_list;

  /// Stable identifier, "<BAND>/<tile_id>".
  std::string id() const { return std::string(to_string(band)) + "/" + tile_id; }
};

}  // namespace misr
