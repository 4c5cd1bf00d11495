#include <gtest/gtest.h>

#include <filesystem>

#include "misr/nn/params_io.hpp"

using namespace misr;
using namespace misr::nn;

TEST(ParamsIo, RoundTripIsExact) {
  const auto p = init_params<float>(3);
  const Bytes bytes = encode_params(p);
  EXPECT_TRUE(decode_params(bytes) == p);
  const auto dir = std::filesystem::temp_directory_path() / "misr_params_io";
  std::filesystem::create_directories(dir);
  save_params(dir / "p.bin", p);
  EXPECT_TRUE(load_params(dir / "p.bin") == p);
  EXPECT_EQ(read_file(dir / "p.bin"), bytes);
  std::filesystem::remove_all(dir);
}

TEST(ParamsIo, SizeIsHeaderPlusFloats) {
  const Bytes bytes = encode_params(NetworkParams<float>{});
  std::size_t header = 8 + 4 + 4;
  for (const char* name : NetworkParams<float>::kNames) header += 4 + std::string(name).size() + 16;
  EXPECT_EQ(bytes.size(), header + 4 * 106793);
}

TEST(ParamsIo, RejectsCorruption) {
  const Bytes good = encode_params(init_params<float>(1));
  Bytes truncated(good.begin(), good.end() - 3);
  EXPECT_THROW(decode_params(truncated), FormatError);
  Bytes magic = good;
  magic[0] = 'X';
  EXPECT_THROW(decode_params(magic), FormatError);
  Bytes version = good;
  version[8] = 2;
  EXPECT_THROW(decode_params(version), FormatError);
  Bytes trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_params(trailing), FormatError);
  EXPECT_THROW(decode_params(Bytes{}), FormatError);
}

TEST(ParamsIo, RejectsShapeMismatch) {
  Bytes bytes = encode_params(NetworkParams<float>{});
  // First shape entry follows magic, version, count, name length and name.
  const std::size_t shape_at = 8 + 4 + 4 + 4 + std::string("conv1.weight").size();
  bytes[shape_at] = 127;
  EXPECT_THROW(decode_params(bytes), ShapeError);
  Bytes count = encode_params(NetworkParams<float>{});
  count[12] = 7;
  EXPECT_THROW(decode_params(count), ShapeError);
}

TEST(ParamsIo, MissingFileIsIoError) {
  EXPECT_THROW(load_params("/nonexistent/params.bin"), IoError);
}
