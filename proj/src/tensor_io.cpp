// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace bgl {

namespace {

constexpr char kMagic[4] = {'B', 'G', 'L', 'T'};

void put_u32(std::ostream& os, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("truncated tensor file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path.string());
  os.write(kMagic, 4);
  put_u32(os, static_cast<uint32_t>(t.ndim()));
  for (int64_t d : t.shape()) put_u32(os, static_cast<uint32_t>(d));
  for (int64_t i = 0; i < t.numel(); ++i) {
    const float f = static_cast<float>(t[i]);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(os, bits);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("not a tensor file: " + path.string());
  }
  const uint32_t rank = get_u32(is);
  if (rank > 8) throw IoError("implausible tensor rank in " + path.string());
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<int64_t>(get_u32(is));
  const int64_t n = shape_numel(shape);
  std::vector<double> values(static_cast<size_t>(n));
  for (auto& v : values) {
    const uint32_t bits = get_u32(is);
    float f;
    std::memcpy(&f, &bits, 4);
    v = static_cast<double>(f);
  }
  // Make sure there is no trailing garbage.
  is.peek();
  if (!is.eof()) throw IoError("trailing bytes in tensor file: " + path.string());
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace bgl
