#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asos/io/npy.hpp"
#include "asos/io/tiff.hpp"
#include "asos/tensor.hpp"

namespace asos::data {

constexpr std::uint16_t kMaxReflectance = 10000;

enum class Subset { kTrain, kVal, kTest };

inline const char* to_string(Subset s) {
  switch (s) {
    case Subset::kTrain: return "train";
    case Subset::kVal: return "val";
    case Subset::kTest: return "test";
  }
  return "?";
}

inline Subset subset_from_string(const std::string& s) {
  if (s == "train") return Subset::kTrain;
  if (s == "val") return Subset::kVal;
  if (s == "test") return Subset::kTest;
  throw DataError("unknown subset name: '" + s + "'");
}

/// One dataset tile: multiband reflectance counts in [0, 10000], a binary
/// label (0 anthropogenic, 1 wild) and a map location. `pixels` is
/// (channels, h, w); `location` is (x, y) in meters for planar categories or
/// (lon, lat) in degrees for geographic ones.
struct RasterSample {
  std::string id;
  Tensor<std::uint16_t> pixels;
  float label = 0.0f;
  double location_x = 0.0;
  double location_y = 0.0;
  std::string category;

  std::size_t channels() const { return pixels.dim(0); }
  std::size_t height() const { return pixels.dim(1); }
  std::size_t width() const { return pixels.dim(2); }
};

inline bool is_planar_category(const std::string& category) {
  return category.rfind("synthetic-", 0) == 0;
}

/// Load one tile. Dispatches on extension: `.npy` holds (h, w, c) uint16,
/// `.tif`/`.tiff` the standard container. Returns (c, h, w).
inline Tensor<std::uint16_t> load_raster(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == ".npy") {
    Tensor<std::uint16_t> hwc = io::load_npy<std::uint16_t>(path);
    if (hwc.rank() == 2) hwc.reshape({hwc.dim(0), hwc.dim(1), 1});
    if (hwc.rank() != 3)
      throw DataError("tile " + path + " is not a (h, w, c) array");
    Tensor<std::uint16_t> chw({hwc.dim(2), hwc.dim(0), hwc.dim(1)});
    for (std::size_t y = 0; y < hwc.dim(0); ++y)
      for (std::size_t x = 0; x < hwc.dim(1); ++x)
        for (std::size_t c = 0; c < hwc.dim(2); ++c)
          chw(c, y, x) = hwc(y, x, c);
    return chw;
  }
  if (ext == ".tif" || ext == ".tiff") return io::load_tiff(path);
  throw DataError("unknown tile container '" + ext + "': " + path);
}

inline void save_raster(const std::string& path,
                        const Tensor<std::uint16_t>& chw) {
  std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".npy") {
    Tensor<std::uint16_t> hwc({chw.dim(1), chw.dim(2), chw.dim(0)});
    for (std::size_t c = 0; c < chw.dim(0); ++c)
      for (std::size_t y = 0; y < chw.dim(1); ++y)
        for (std::size_t x = 0; x < chw.dim(2); ++x)
          hwc(y, x, c) = chw(c, y, x);
    io::save_npy(path, hwc);
    return;
  }
  if (ext == ".tif" || ext == ".tiff") {
    io::save_tiff(path, chw);
    return;
  }
  throw DataError("unknown tile container '" + ext + "': " + path);
}

/// Enforce the reflectance range; names the offending tile.
inline void validate_pixels(const Tensor<std::uint16_t>& pixels,
                            const std::string& id) {
  for (std::uint16_t v : pixels)
    if (v > kMaxReflectance)
      throw DataError("tile " + id + " has pixel value " + std::to_string(v) +
                      " outside [0, 10000]");
}

}  // namespace asos::data
