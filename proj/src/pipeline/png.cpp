// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/pipeline/png.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "bgl/errors.hpp"

namespace bgl {

namespace {

void put_u32_be(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void append_chunk(std::string& out, const char type[4], const std::string& payload) {
  put_u32_be(out, static_cast<uint32_t>(payload.size()));
  std::string body(type, 4);
  body += payload;
  out += body;
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
  put_u32_be(out, crc);
}

}  // namespace

void write_png_rgb8(const std::string& path, const Tensor& rgb) {
  if (rgb.shape().size() != 3 || rgb.dim(0) != 3) {
    throw ShapeError("png export expects shape [3,H,W]");
  }
  const int64_t h = rgb.dim(1), w = rgb.dim(2);
  const auto& v = rgb.values();
  const size_t plane = static_cast<size_t>(h * w);

  // Filter byte 0 per scanline, then interleaved RGB.
  std::string raster;
  raster.reserve(static_cast<size_t>(h * (1 + 3 * w)));
  for (int64_t y = 0; y < h; ++y) {
    raster.push_back('\0');
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t c = 0; c < 3; ++c) {
        double val = v[static_cast<size_t>(c) * plane + static_cast<size_t>(y * w + x)];
        val = val < 0.0 ? 0.0 : (val > 1.0 ? 1.0 : val);
        raster.push_back(static_cast<char>(std::lround(val * 255.0)));
      }
    }
  }

  uLongf bound = compressBound(static_cast<uLong>(raster.size()));
  std::string deflated(bound, '\0');
  const int rc = compress2(reinterpret_cast<Bytef*>(deflated.data()), &bound,
                           reinterpret_cast<const Bytef*>(raster.data()),
                           static_cast<uLong>(raster.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw IoError("png deflate failed");
  deflated.resize(bound);

  std::string ihdr;
  put_u32_be(ihdr, static_cast<uint32_t>(w));
  put_u32_be(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter method
  ihdr.push_back(0);   // no interlace

  std::string out("\x89PNG\r\n\x1a\n", 8);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", deflated);
  append_chunk(out, "IEND", "");

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing " + path);
}

}  // namespace bgl
