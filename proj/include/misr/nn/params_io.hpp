#pragma once

// Parameter file layout (all integers little-endian):
//
//   8 bytes   magic "MISRNET\0"
//   u32       format version (1)
//   u32       tensor count
//   per tensor, in declaration order:
//     u32 name length, name bytes, 4 x u32 shape (n, c, h, w)
//   per tensor, in the same order:
//     shape.count() IEEE-754 binary32 values

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "misr/error.hpp"
#include "misr/nn/network.hpp"
#include "misr/png_io.hpp"

namespace misr::nn {

inline constexpr std::array<char, 8> kParamMagic = {'M', 'I', 'S', 'R', 'N', 'E', 'T', '\0'};
inline constexpr std::uint32_t kParamVersion = 1;

namespace detail {

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("parameter file truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Bytes encode_params(const NetworkParams<float>& p) {
  Bytes out(kParamMagic.begin(), kParamMagic.end());
  detail::put_u32(out, kParamVersion);
  const auto tensors = p.tensors();
  detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string name = NetworkParams<float>::kNames[i];
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const Shape& s = tensors[i]->shape;
    for (int d : {s.n, s.c, s.h, s.w}) detail::put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const auto* t : tensors) {
    for (float v : t->data) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

/// Throws FormatError on a bad header or truncation, ShapeError when the shape
/// table disagrees with the network architecture.
inline NetworkParams<float> decode_params(std::span<const std::uint8_t> bytes) {
  detail::Reader r(bytes);
  const auto magic = r.bytes(kParamMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kParamMagic.begin())) throw FormatError("parameter file: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kParamVersion) throw FormatError("parameter file: unsupported version " + std::to_string(version));
  NetworkParams<float> p;
  auto tensors = p.tensors();
  const std::uint32_t count = r.u32();
  if (count != tensors.size()) {
    throw ShapeError("parameter file: " + std::to_string(count) + " tensors, architecture has " +
                     std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::uint32_t len = r.u32();
    if (len > 256) throw FormatError("parameter file: implausible tensor name length");
    const auto name_bytes = r.bytes(len);
    const std::string name(name_bytes.begin(), name_bytes.end());
    Shape s;
    s.n = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.h = static_cast<int>(r.u32());
    s.w = static_cast<int>(r.u32());
    if (name != NetworkParams<float>::kNames[i] || s != tensors[i]->shape) {
      throw ShapeError("parameter file: tensor " + std::to_string(i) + " is " + name + s.str() + ", expected " +
                       NetworkParams<float>::kNames[i] + tensors[i]->shape.str());
    }
  }
  for (auto* t : tensors) {
    for (float& v : t->data) v = std::bit_cast<float>(r.u32());
  }
  if (!r.done()) throw FormatError("parameter file: trailing bytes");
  return p;
}

inline void save_params(const std::filesystem::path& path, const NetworkParams<float>& p) {
  write_file(path, encode_params(p));
}

inline NetworkParams<float> load_params(const std::filesystem::path& path) { return decode_params(read_file(path)); }

}  // namespace misr::nn
