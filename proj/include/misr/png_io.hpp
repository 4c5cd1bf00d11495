#pragma once

// 16-bit grayscale PNG codec for images and tolerant mask decoding.

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "misr/error.hpp"
#include "misr/raster.hpp"

namespace misr {

using Bytes = std::vector<std::uint8_t>;

namespace detail {

struct PngReadContext {
  std::span<const std::uint8_t> input;
  std::size_t offset = 0;
  char message[256] = {};
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int channels = 0;
  // One sample per pixel, widened to 16 bits.
  std::vector<std::uint16_t> samples;
  std::vector<std::uint8_t> row;
  std::vector<png_bytep> row_pointers;
};

struct PngWriteContext {
  Bytes* out = nullptr;
  char message[256] = {};
};

inline void png_read_from_span(png_structp png, png_bytep data, png_size_t length) {
  auto* ctx = static_cast<PngReadContext*>(png_get_io_ptr(png));
  if (ctx->input.size() - ctx->offset < length) png_error(png, "truncated PNG stream");
  std::memcpy(data, ctx->input.data() + ctx->offset, length);
  ctx->offset += length;
}

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* ctx = static_cast<PngWriteContext*>(png_get_io_ptr(png));
  ctx->out->insert(ctx->out->end(), data, data + length);
}

inline void png_flush_noop(png_structp) {}

inline void png_record_error(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<char*>(png_get_error_ptr(png));
  std::strncpy(buf, msg, 255);
  png_longjmp(png, 1);
}

inline void png_ignore_warning(png_structp, png_const_charp) {}

// Decodes any single-channel grayscale PNG into ctx. Returns false and fills
// ctx.message on failure. Kept free of C++ objects with destructors between
// setjmp and the end of the function.
inline bool png_decode_gray(PngReadContext& ctx) {
  if (ctx.input.size() < 8 || png_sig_cmp(ctx.input.data(), 0, 8) != 0) {
    std::strcpy(ctx.message, "not a PNG stream (bad signature)");
    return false;
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, ctx.message, png_record_error, png_ignore_warning);
  if (png == nullptr) {
    std::strcpy(ctx.message, "cannot allocate PNG reader");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, info != nullptr ? &info : nullptr, nullptr);
    return false;
  }
  png_set_read_fn(png, &ctx, png_read_from_span);
  png_read_info(png, info);

  int interlace = 0;
  png_get_IHDR(png, info, &ctx.width, &ctx.height, &ctx.bit_depth, &ctx.color_type, &interlace, nullptr, nullptr);
  ctx.channels = png_get_channels(png, info);
  if (ctx.color_type != PNG_COLOR_TYPE_GRAY || ctx.channels != 1) {
    std::strcpy(ctx.message, "expected a single-band grayscale PNG");
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (ctx.bit_depth < 8) png_set_packing(png);
  if (interlace != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  ctx.row.resize(rowbytes * ctx.height);
  ctx.samples.resize(static_cast<std::size_t>(ctx.width) * ctx.height);
  ctx.row_pointers.resize(ctx.height);
  for (std::uint32_t y = 0; y < ctx.height; ++y) ctx.row_pointers[y] = ctx.row.data() + rowbytes * y;
  png_read_image(png, ctx.row_pointers.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  for (std::uint32_t y = 0; y < ctx.height; ++y) {
    const std::uint8_t* src = ctx.row.data() + rowbytes * y;
    std::uint16_t* dst = ctx.samples.data() + static_cast<std::size_t>(y) * ctx.width;
    for (std::uint32_t x = 0; x < ctx.width; ++x) {
      dst[x] = ctx.bit_depth == 16 ? static_cast<std::uint16_t>((src[2 * x] << 8) | src[2 * x + 1]) : src[x];
    }
  }
  return true;
}

inline bool png_encode_gray(Bytes& out, std::uint32_t width, std::uint32_t height, int bit_depth,
                            const std::vector<std::uint8_t>& rowdata, std::size_t rowbytes, char* message) {
  PngWriteContext ctx;
  ctx.out = &out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, ctx.message, png_record_error, png_ignore_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    std::strncpy(message, ctx.message, 255);
    png_destroy_write_struct(&png, info != nullptr ? &info : nullptr);
    return false;
  }
  png_set_write_fn(png, &ctx, png_write_to_vector, png_flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::uint32_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rowdata.data() + rowbytes * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

/// Decodes a 16-bit single-band PNG. intensity = raw / 65535.
inline Image decode_image(std::span<const std::uint8_t> bytes) {
  detail::PngReadContext ctx;
  ctx.input = bytes;
  if (!detail::png_decode_gray(ctx)) throw DecodeError(std::string("image decode failed: ") + ctx.message);
  if (ctx.bit_depth != 16) {
    throw DecodeError("image decode failed: expected 16-bit depth, found " + std::to_string(ctx.bit_depth));
  }
  std::vector<double> pixels(ctx.samples.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = ctx.samples[i] / kRawScale;
  return Image(static_cast<int>(ctx.width), static_cast<int>(ctx.height), std::move(pixels));
}

/// Decodes a grayscale mask of any bit depth. 0 = concealed, nonzero = clear.
inline QualityMask decode_mask(std::span<const std::uint8_t> bytes) {
  detail::PngReadContext ctx;
  ctx.input = bytes;
  if (!detail::png_decode_gray(ctx)) throw DecodeError(std::string("mask decode failed: ") + ctx.message);
  std::vector<std::uint8_t> states(ctx.samples.size());
  for (std::size_t i = 0; i < states.size(); ++i) states[i] = ctx.samples[i] != 0 ? 1 : 0;
  return QualityMask(static_cast<int>(ctx.width), static_cast<int>(ctx.height), std::move(states));
}

inline std::uint16_t to_raw(double intensity) noexcept {
  return static_cast<std::uint16_t>(std::lround(intensity * kRawScale));
}

/// Encodes as 16-bit grayscale PNG. Output bytes depend only on the pixels.
inline Bytes encode_image(const Image& img) {
  const std::size_t rowbytes = static_cast<std::size_t>(img.width()) * 2;
  std::vector<std::uint8_t> rows(rowbytes * static_cast<std::size_t>(img.height()));
  std::size_t k = 0;
  for (double v : img.pixels()) {
    const std::uint16_t raw = to_raw(v);
    rows[k++] = static_cast<std::uint8_t>(raw >> 8);
    rows[k++] = static_cast<std::uint8_t>(raw & 0xFF);
  }
  Bytes out;
  char message[256] = {};
  if (!detail::png_encode_gray(out, static_cast<std::uint32_t>(img.width()), static_cast<std::uint32_t>(img.height()),
                               16, rows, rowbytes, message)) {
    throw IoError(std::string("image encode failed: ") + message);
  }
  return out;
}

/// Encodes as 8-bit grayscale PNG, 255 = clear, 0 = concealed.
inline Bytes encode_mask(const QualityMask& mask) {
  std::vector<std::uint8_t> rows(mask.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = mask.states()[i] != 0 ? 255 : 0;
  Bytes out;
  char message[256] = {};
  if (!detail::png_encode_gray(out, static_cast<std::uint32_t>(mask.width()), static_cast<std::uint32_t>(mask.height()),
                               8, rows, static_cast<std::size_t>(mask.width()), message)) {
    throw IoError(std::string("mask encode failed: ") + message);
  }
  return out;
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline Image load_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

inline QualityMask load_mask(const std::filesystem::path& path) {
  try {
    return decode_mask(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

inline void save_image(const std::filesystem::path& path, const Image& img) { write_file(path, encode_image(img)); }
inline void save_mask(const std::filesystem::path& path, const QualityMask& mask) {
  write_file(path, encode_mask(mask));
}

}  // namespace misr
