#pragma once

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "asos/io/binary.hpp"
#include "asos/tensor.hpp"

namespace asos::io {

// Multiband TIFF codec for raster tiles.
//
// The reader covers the layouts that occur in exported satellite tiles:
// classic (non-Big) TIFF, either byte order, 8- or 16-bit unsigned samples,
// strip or tile organization, chunky or planar configuration, compression
// none / LZW / Deflate, and the horizontal differencing predictor.
// The writer emits uncompressed chunky little-endian uint16 strips.
// Geo keys are ignored; tile coordinates come from the dataset manifest.

namespace tiff_detail {

struct Segment {
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
};

class ByteView {
 public:
  ByteView(const std::vector<std::uint8_t>& buf, bool big_endian,
           const std::string& path)
      : buf_(buf), big_(big_endian), path_(path) {}

  std::uint16_t u16(std::uint64_t off) const {
    check(off, 2);
    return big_ ? static_cast<std::uint16_t>(buf_[off] << 8 | buf_[off + 1])
                : static_cast<std::uint16_t>(buf_[off] | buf_[off + 1] << 8);
  }
  std::uint32_t u32(std::uint64_t off) const {
    check(off, 4);
    if (big_)
      return std::uint32_t(buf_[off]) << 24 | std::uint32_t(buf_[off + 1]) << 16 |
             std::uint32_t(buf_[off + 2]) << 8 | buf_[off + 3];
    return std::uint32_t(buf_[off]) | std::uint32_t(buf_[off + 1]) << 8 |
           std::uint32_t(buf_[off + 2]) << 16 | std::uint32_t(buf_[off + 3]) << 24;
  }
  const std::uint8_t* ptr(std::uint64_t off, std::uint64_t n) const {
    check(off, n);
    return buf_.data() + off;
  }
  bool big_endian() const { return big_; }
  const std::string& path() const { return path_; }

 private:
  void check(std::uint64_t off, std::uint64_t n) const {
    if (off + n > buf_.size())
      throw DataError("truncated tiff file: " + path_);
  }
  const std::vector<std::uint8_t>& buf_;
  bool big_;
  std::string path_;
};

inline std::uint64_t type_size(std::uint16_t type) {
  switch (type) {
    case 1: case 2: case 6: case 7: return 1;   // BYTE, ASCII, SBYTE, UNDEF
    case 3: case 8: return 2;                   // SHORT, SSHORT
    case 4: case 9: case 11: return 4;          // LONG, SLONG, FLOAT
    case 5: case 10: case 12: return 8;         // RATIONAL, SRATIONAL, DOUBLE
    default: return 0;
  }
}

using TagMap = std::map<std::uint16_t, std::vector<std::uint64_t>>;

inline TagMap read_ifd(const ByteView& v, std::uint64_t ifd_off) {
  TagMap tags;
  std::uint16_t n_entries = v.u16(ifd_off);
  for (std::uint16_t e = 0; e < n_entries; ++e) {
    std::uint64_t entry = ifd_off + 2 + std::uint64_t(e) * 12;
    std::uint16_t tag = v.u16(entry);
    std::uint16_t type = v.u16(entry + 2);
    std::uint64_t count = v.u32(entry + 4);
    std::uint64_t tsize = type_size(type);
    if (tsize == 0) continue;  // unknown type, skip tag
    std::uint64_t total = tsize * count;
    std::uint64_t value_off = total <= 4 ? entry + 8 : v.u32(entry + 8);
    std::vector<std::uint64_t> vals;
    vals.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t off = value_off + i * tsize;
      switch (tsize) {
        case 1: vals.push_back(*v.ptr(off, 1)); break;
        case 2: vals.push_back(v.u16(off)); break;
        case 4: vals.push_back(v.u32(off)); break;
        default: vals.push_back(0); break;  // rationals unused here
      }
    }
    tags[tag] = std::move(vals);
  }
  return tags;
}

inline std::uint64_t tag_scalar(const TagMap& tags, std::uint16_t tag,
                                std::uint64_t dflt) {
  auto it = tags.find(tag);
  return it == tags.end() || it->second.empty() ? dflt : it->second[0];
}

// TIFF-flavour LZW: MSB-first bit packing, 9-bit initial codes, clear = 256,
// end-of-information = 257, code width bumps one code early.
inline std::vector<std::uint8_t> lzw_decode(const std::uint8_t* src,
                                            std::uint64_t n,
                                            std::uint64_t expected,
                                            const std::string& path) {
  std::vector<std::uint8_t> out;
  out.reserve(expected);
  constexpr int kClear = 256, kEoi = 257, kFirst = 258;
  std::vector<std::vector<std::uint8_t>> table;
  auto reset_table = [&] {
    table.assign(kFirst, {});
    for (int i = 0; i < 256; ++i) table[i] = {static_cast<std::uint8_t>(i)};
  };
  reset_table();
  int code_bits = 9;
  std::uint64_t bitpos = 0;
  auto next_code = [&]() -> int {
    if ((bitpos + code_bits + 7) / 8 > n) return kEoi;
    int code = 0;
    for (int b = 0; b < code_bits; ++b) {
      std::uint64_t byte = (bitpos + b) / 8;
      int bit = 7 - static_cast<int>((bitpos + b) % 8);
      code = code << 1 | (src[byte] >> bit & 1);
    }
    bitpos += code_bits;
    return code;
  };

  int prev = -1;
  while (out.size() < expected) {
    int code = next_code();
    if (code == kEoi) break;
    if (code == kClear) {
      reset_table();
      code_bits = 9;
      prev = -1;
      continue;
    }
    std::vector<std::uint8_t> entry;
    if (code < static_cast<int>(table.size()) && !(code >= 256 && code < kFirst)) {
      entry = table[code];
    } else if (code == static_cast<int>(table.size()) && prev >= 0) {
      entry = table[prev];
      entry.push_back(table[prev][0]);
    } else {
      throw DataError("corrupt lzw stream in tiff: " + path);
    }
    out.insert(out.end(), entry.begin(), entry.end());
    if (prev >= 0) {
      std::vector<std::uint8_t> ne = table[prev];
      ne.push_back(entry[0]);
      table.push_back(std::move(ne));
    }
    prev = code;
    if (table.size() + 1 >= (1ull << code_bits) && code_bits < 12) ++code_bits;
  }
  return out;
}

inline std::vector<std::uint8_t> inflate_zlib(const std::uint8_t* src,
                                              std::uint64_t n,
                                              std::uint64_t expected,
                                              const std::string& path) {
  std::vector<std::uint8_t> out(expected);
  uLongf dlen = static_cast<uLongf>(expected);
  int rc = ::uncompress(out.data(), &dlen, src, static_cast<uLong>(n));
  if (rc != Z_OK) throw DataError("tiff deflate stream corrupt: " + path);
  out.resize(dlen);
  return out;
}

}  // namespace tiff_detail

/// Read the first image of a TIFF file into a (channels, height, width)
/// uint16 tensor. 8-bit samples are widened without scaling.
inline Tensor<std::uint16_t> load_tiff(const std::string& path) {
  using namespace tiff_detail;
  std::vector<std::uint8_t> buf = read_file(path);
  if (buf.size() < 8) throw DataError("not a tiff file: " + path);
  bool big = buf[0] == 'M' && buf[1] == 'M';
  if (!big && !(buf[0] == 'I' && buf[1] == 'I'))
    throw DataError("not a tiff file: " + path);
  ByteView v(buf, big, path);
  if (v.u16(2) != 42)
    throw DataError("unsupported tiff variant (expected classic): " + path);
  TagMap tags = read_ifd(v, v.u32(4));

  const std::uint64_t width = tag_scalar(tags, 256, 0);
  const std::uint64_t height = tag_scalar(tags, 257, 0);
  const std::uint64_t spp = tag_scalar(tags, 277, 1);
  const std::uint64_t bps = tag_scalar(tags, 258, 1);
  const std::uint64_t compression = tag_scalar(tags, 259, 1);
  const std::uint64_t planar = tag_scalar(tags, 284, 1);
  const std::uint64_t predictor = tag_scalar(tags, 317, 1);
  const std::uint64_t sample_format = tag_scalar(tags, 339, 1);

  if (width == 0 || height == 0)
    throw DataError("tiff missing image dimensions: " + path);
  if (bps != 8 && bps != 16)
    throw DataError("tiff has " + std::to_string(bps) +
                    "-bit samples, only 8/16-bit supported: " + path);
  if (sample_format != 1)
    throw DataError("tiff sample format is not unsigned int: " + path);
  if (compression != 1 && compression != 5 && compression != 8 &&
      compression != 32946)
    throw DataError("unsupported tiff compression " +
                    std::to_string(compression) + ": " + path);

  const bool tiled = tags.count(322) != 0;
  std::uint64_t seg_w = tiled ? tag_scalar(tags, 322, 0) : width;
  std::uint64_t seg_h = tiled ? tag_scalar(tags, 323, 0)
                              : tag_scalar(tags, 278, height);
  if (seg_w == 0 || seg_h == 0)
    throw DataError("tiff segment geometry invalid: " + path);
  auto offs_it = tags.find(tiled ? 324 : 273);
  auto cnts_it = tags.find(tiled ? 325 : 279);
  if (offs_it == tags.end() || cnts_it == tags.end())
    throw DataError("tiff missing strip/tile offsets: " + path);
  const auto& seg_off = offs_it->second;
  const auto& seg_cnt = cnts_it->second;
  if (seg_off.size() != seg_cnt.size())
    throw DataError("tiff offset/count tables disagree: " + path);

  const std::uint64_t across = (width + seg_w - 1) / seg_w;
  const std::uint64_t down = (height + seg_h - 1) / seg_h;
  const std::uint64_t per_plane = across * down;
  const std::uint64_t n_planes = planar == 2 ? spp : 1;
  if (seg_off.size() < per_plane * n_planes)
    throw DataError("tiff has too few data segments: " + path);
  const std::uint64_t samples_per_px = planar == 2 ? 1 : spp;
  const std::uint64_t bytes_per_sample = bps / 8;

  Tensor<std::uint16_t> out({spp, height, width});

  for (std::uint64_t plane = 0; plane < n_planes; ++plane) {
    for (std::uint64_t s = 0; s < per_plane; ++s) {
      const std::uint64_t idx = plane * per_plane + s;
      const std::uint64_t y0 = (s / across) * seg_h;
      const std::uint64_t x0 = (s % across) * seg_w;
      const std::uint64_t rows =
          tiled ? seg_h : std::min(seg_h, height - y0);
      const std::uint64_t row_samples = (tiled ? seg_w : width) * samples_per_px;
      const std::uint64_t expect = rows * row_samples * bytes_per_sample;

      std::vector<std::uint8_t> seg;
      const std::uint8_t* raw = v.ptr(seg_off[idx], seg_cnt[idx]);
      if (compression == 1) {
        seg.assign(raw, raw + std::min<std::uint64_t>(seg_cnt[idx], expect));
        seg.resize(expect, 0);
      } else if (compression == 5) {
        seg = lzw_decode(raw, seg_cnt[idx], expect, path);
        seg.resize(expect, 0);
      } else {
        seg = inflate_zlib(raw, seg_cnt[idx], expect, path);
        seg.resize(expect, 0);
      }

      if (predictor == 2) {
        for (std::uint64_t r = 0; r < rows; ++r) {
          std::uint8_t* rowp = seg.data() + r * row_samples * bytes_per_sample;
          if (bps == 8) {
            for (std::uint64_t i = samples_per_px; i < row_samples; ++i)
              rowp[i] = static_cast<std::uint8_t>(rowp[i] + rowp[i - samples_per_px]);
          } else {
            for (std::uint64_t i = samples_per_px; i < row_samples; ++i) {
              std::uint64_t a = i * 2, b = (i - samples_per_px) * 2;
              std::uint16_t pv, cv;
              if (big) {
                pv = static_cast<std::uint16_t>(rowp[b] << 8 | rowp[b + 1]);
                cv = static_cast<std::uint16_t>(rowp[a] << 8 | rowp[a + 1]);
                cv = static_cast<std::uint16_t>(cv + pv);
                rowp[a] = static_cast<std::uint8_t>(cv >> 8);
                rowp[a + 1] = static_cast<std::uint8_t>(cv);
              } else {
                pv = static_cast<std::uint16_t>(rowp[b] | rowp[b + 1] << 8);
                cv = static_cast<std::uint16_t>(rowp[a] | rowp[a + 1] << 8);
                cv = static_cast<std::uint16_t>(cv + pv);
                rowp[a] = static_cast<std::uint8_t>(cv);
                rowp[a + 1] = static_cast<std::uint8_t>(cv >> 8);
              }
            }
          }
        }
      }

      // Scatter the segment into (c, h, w), clipping tile padding.
      const std::uint64_t copy_rows = std::min(rows, height - y0);
      const std::uint64_t seg_cols = tiled ? seg_w : width;
      const std::uint64_t copy_cols = std::min(seg_cols, width - x0);
      for (std::uint64_t r = 0; r < copy_rows; ++r) {
        for (std::uint64_t c = 0; c < copy_cols; ++c) {
          for (std::uint64_t ch = 0; ch < samples_per_px; ++ch) {
            std::uint64_t si = (r * seg_cols + c) * samples_per_px + ch;
            std::uint16_t val;
            if (bps == 8) {
              val = seg[si];
            } else if (big) {
              val = static_cast<std::uint16_t>(seg[si * 2] << 8 | seg[si * 2 + 1]);
            } else {
              val = static_cast<std::uint16_t>(seg[si * 2] | seg[si * 2 + 1] << 8);
            }
            std::uint64_t channel = planar == 2 ? plane : ch;
            out(channel, y0 + r, x0 + c) = val;
          }
        }
      }
    }
  }
  return out;
}

/// Write a (channels, height, width) uint16 tensor as an uncompressed
/// little-endian chunky TIFF.
inline void save_tiff(const std::string& path, const Tensor<std::uint16_t>& t) {
  if (t.rank() != 3) throw DataError("save_tiff expects a (c, h, w) tensor");
  const std::uint32_t spp = static_cast<std::uint32_t>(t.dim(0));
  const std::uint32_t height = static_cast<std::uint32_t>(t.dim(1));
  const std::uint32_t width = static_cast<std::uint32_t>(t.dim(2));

  struct Entry {
    std::uint16_t tag, type;
    std::uint32_t count, value;
  };
  std::vector<Entry> entries;
  std::string extra;  // out-of-line tag payloads, appended after the IFD

  const std::uint32_t n_entries = 11;
  const std::uint32_t ifd_off = 8;
  const std::uint32_t ifd_bytes = 2 + n_entries * 12 + 4;
  const std::uint32_t extra_off = ifd_off + ifd_bytes;

  auto add_short_array = [&](std::uint16_t tag, std::uint32_t count,
                             std::uint16_t fill) {
    if (count <= 2) {
      std::uint32_t v = fill | (count == 2 ? std::uint32_t(fill) << 16 : 0);
      entries.push_back({tag, 3, count, v});
    } else {
      std::uint32_t off = extra_off + static_cast<std::uint32_t>(extra.size());
      for (std::uint32_t i = 0; i < count; ++i) {
        extra.push_back(static_cast<char>(fill & 0xff));
        extra.push_back(static_cast<char>(fill >> 8));
      }
      entries.push_back({tag, 3, count, off});
    }
  };

  const std::uint64_t data_bytes = std::uint64_t(spp) * height * width * 2;

  entries.push_back({256, 4, 1, width});
  entries.push_back({257, 4, 1, height});
  add_short_array(258, spp, 16);                       // BitsPerSample
  entries.push_back({259, 3, 1, 1});                   // Compression: none
  entries.push_back({262, 3, 1, 1});                   // Photometric: min-is-black
  entries.push_back({277, 3, 1, spp});                 // SamplesPerPixel
  entries.push_back({278, 4, 1, height});              // RowsPerStrip
  entries.push_back({284, 3, 1, 1});                   // PlanarConfig: chunky
  add_short_array(339, spp, 1);                        // SampleFormat: uint
  const std::uint32_t data_off =
      extra_off + static_cast<std::uint32_t>(extra.size());
  entries.push_back({273, 4, 1, data_off});            // StripOffsets
  entries.push_back({279, 4, 1, static_cast<std::uint32_t>(data_bytes)});
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.tag < b.tag; });
  if (entries.size() != n_entries)
    throw DataError("internal tiff writer inconsistency");

  std::string out;
  out += "II";
  out.push_back(42);
  out.push_back(0);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(ifd_off >> (8 * i)));

  auto put16 = [&](std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  };
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
  };

  put16(static_cast<std::uint16_t>(entries.size()));
  for (const Entry& e : entries) {
    put16(e.tag);
    put16(e.type);
    put32(e.count);
    if (e.type == 3 && e.count == 1) {
      put16(static_cast<std::uint16_t>(e.value));
      put16(0);
    } else {
      put32(e.value);
    }
  }
  put32(0);  // no next IFD

  out += extra;
  // interleave (h, w, c) little-endian
  std::string pix;
  pix.reserve(data_bytes);
  for (std::uint32_t y = 0; y < height; ++y)
    for (std::uint32_t x = 0; x < width; ++x)
      for (std::uint32_t c = 0; c < spp; ++c) {
        std::uint16_t v = t(c, y, x);
        pix.push_back(static_cast<char>(v & 0xff));
        pix.push_back(static_cast<char>(v >> 8));
      }
  out += pix;
  io::write_file_atomic(path, out);
}

}  // namespace asos::io
