#pragma once

// Admission fixtures at the clearance and count boundaries.

#include <cmath>
#include <string>
#include <vector>

#include "misr/assembly.hpp"

namespace fixture {

// Mask with exactly `clear` clear pixels (the first size-clear pixels are
// concealed).
inline misr::QualityMask mask_with_clear(int side, std::size_t clear) {
  const std::size_t total = static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
  std::vector<std::uint8_t> s(total, 1);
  std::fill(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(total - clear), 0);
  return misr::QualityMask(side, side, std::move(s));
}

// Smallest clear count reaching the fraction (how "0.60" is realised on a
// 128x128 mask, where 0.6 * 16384 is not an integer).
inline std::size_t at_least(int side, double fraction) {
  return static_cast<std::size_t>(std::ceil(fraction * side * side - 1e-9));
}
// Largest clear count strictly below the fraction.
inline std::size_t below(int side, double fraction) { return at_least(side, fraction) - 1; }
// Clear count closest to the fraction from below.
inline std::size_t about(int side, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * side * side));
}

inline std::vector<misr::HrCandidate> hrs(std::size_t clear_count) {
  return {misr::HrCandidate{misr::Image::filled(misr::kHrSize, misr::kHrSize, 0.5),
                            mask_with_clear(misr::kHrSize, clear_count)}};
}

inline std::vector<misr::LowRes> lrs(int n, std::size_t clear_count) {
  std::vector<misr::LowRes> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(misr::LowRes{misr::Image::filled(misr::kLrSize, misr::kLrSize, 0.5),
                               mask_with_clear(misr::kLrSize, clear_count), i});
  }
  return out;
}

struct Case {
  std::string name;
  std::vector<misr::HrCandidate> hr;
  std::vector<misr::LowRes> lr;
  std::string expected;  // "admitted" or the rejection rule
};

inline const char* kAdmitted = "admitted";

inline std::vector<Case> boundary_cases() {
  const std::size_t lr_full = static_cast<std::size_t>(misr::kLrSize) * misr::kLrSize;
  const std::size_t hr_full = static_cast<std::size_t>(misr::kHrSize) * misr::kHrSize;
  const int L = misr::kLrSize;
  const int H = misr::kHrSize;
  return {
      {"LR clearance 0.59", hrs(hr_full), lrs(9, about(L, 0.59)), misr::rule::kMinLrCount},
      {"LR clearance 0.60", hrs(hr_full), lrs(9, at_least(L, 0.60)), kAdmitted},
      {"HR clearance 0.74", hrs(about(H, 0.74)), lrs(9, lr_full), misr::rule::kHrClearance},
      {"HR clearance 0.75", hrs(at_least(H, 0.75)), lrs(9, lr_full), kAdmitted},
      {"8 LR images", hrs(hr_full), lrs(8, lr_full), misr::rule::kMinLrCount},
      {"9 LR images", hrs(hr_full), lrs(9, lr_full), kAdmitted},
  };
}

inline std::string outcome(const misr::Admission& a) {
  if (const auto* r = std::get_if<misr::Rejection>(&a)) return r->rule;
  return kAdmitted;
}

}  // namespace fixture
