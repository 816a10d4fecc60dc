#pragma once

#include <zlib.h>

#include <cstdint>
#include <string>
#include <vector>

#include "asos/io/binary.hpp"
#include "asos/tensor.hpp"

namespace asos::io {

/// 8-bit RGB raster destined for a PNG file. Row-major, 3 bytes per pixel.
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  RgbImage() = default;
  RgbImage(std::size_t h, std::size_t w)
      : height(h), width(w), pixels(h * w * 3, 0) {}

  std::uint8_t* at(std::size_t y, std::size_t x) {
    return pixels.data() + (y * width + x) * 3;
  }
  const std::uint8_t* at(std::size_t y, std::size_t x) const {
    return pixels.data() + (y * width + x) * 3;
  }

  void set(std::size_t y, std::size_t x, std::uint8_t r, std::uint8_t g,
           std::uint8_t b) {
    auto* p = at(y, x);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
};

namespace detail {

inline void png_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

inline void png_chunk(std::string& out, const char type[4],
                      const std::string& payload) {
  png_be32(out, static_cast<std::uint32_t>(payload.size()));
  std::string body(type, 4);
  body += payload;
  out += body;
  std::uint32_t crc = static_cast<std::uint32_t>(
      ::crc32(0, reinterpret_cast<const Bytef*>(body.data()),
              static_cast<uInt>(body.size())));
  png_be32(out, crc);
}

}  // namespace detail

inline void save_png(const std::string& path, const RgbImage& img) {
  if (img.height == 0 || img.width == 0)
    throw DataError("refusing to write empty png: " + path);

  // Scanlines with per-row filter byte 0 (no filtering).
  std::vector<std::uint8_t> raw;
  raw.reserve(img.height * (img.width * 3 + 1));
  for (std::size_t y = 0; y < img.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), img.at(y, 0), img.at(y, 0) + img.width * 3);
  }

  uLongf zlen = ::compressBound(static_cast<uLong>(raw.size()));
  std::string zdata(zlen, '\0');
  if (::compress2(reinterpret_cast<Bytef*>(zdata.data()), &zlen, raw.data(),
                  static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw DataError("png deflate failed: " + path);
  zdata.resize(zlen);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  detail::png_be32(ihdr, static_cast<std::uint32_t>(img.width));
  detail::png_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", zdata);
  detail::png_chunk(out, "IEND", "");
  write_file_atomic(path, out);
}

}  // namespace asos::io
