#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "asos/data/sample.hpp"
#include "asos/io/csv.hpp"

namespace asos::data {

/// One manifest row: tile file (relative to the dataset root), label,
/// category and location. The sample id is the file path without extension.
struct ManifestEntry {
  std::string file;
  std::string id;
  float label = 0.0f;
  std::string category;
  double x = 0.0;
  double y = 0.0;
};

inline std::string id_from_file(const std::string& file) {
  std::filesystem::path p(file);
  return (p.parent_path() / p.stem()).generic_string();
}

/// Parse a dataset manifest: UTF-8 CSV with header
/// `file,label,category,lon,lat`. Malformed rows fail hard with the row
/// number (1-based, counting the header as row 1).
inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  io::CsvTable t = io::load_csv(path);
  const int c_file = t.require_column("file", path);
  const int c_label = t.require_column("label", path);
  const int c_cat = t.require_column("category", path);
  const int c_lon = t.require_column("lon", path);
  const int c_lat = t.require_column("lat", path);

  std::vector<ManifestEntry> entries;
  entries.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    auto fail = [&](const std::string& what) -> void {
      throw DataError("manifest " + path + " row " + std::to_string(r + 2) +
                      ": " + what);
    };
    std::size_t need = static_cast<std::size_t>(
        std::max({c_file, c_label, c_cat, c_lon, c_lat})) + 1;
    if (row.size() < need) fail("expected at least " + std::to_string(need) +
                                " fields, got " + std::to_string(row.size()));
    ManifestEntry e;
    e.file = row[c_file];
    if (e.file.empty()) fail("empty file field");
    e.id = id_from_file(e.file);
    e.category = row[c_cat];
    try {
      std::size_t pos = 0;
      e.label = std::stof(row[c_label], &pos);
      if (pos != row[c_label].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      fail("label is not a number: '" + row[c_label] + "'");
    }
    if (e.label != 0.0f && e.label != 1.0f)
      fail("stored labels must be 0 or 1, got " + row[c_label]);
    try {
      e.x = std::stod(row[c_lon]);
      e.y = std::stod(row[c_lat]);
    } catch (const std::exception&) {
      fail("location is not numeric: '" + row[c_lon] + "', '" + row[c_lat] + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

/// Load one manifest entry's tile. Missing files and out-of-range pixels are
/// hard errors naming the tile.
inline RasterSample load_sample(const std::string& root,
                                const ManifestEntry& e) {
  namespace fs = std::filesystem;
  fs::path tile = fs::path(root) / e.file;
  if (!fs::exists(tile))
    throw DataError("tile file missing: " + tile.string());
  RasterSample s;
  s.id = e.id;
  s.pixels = load_raster(tile.string());
  validate_pixels(s.pixels, e.file);
  s.label = e.label;
  s.category = e.category;
  s.location_x = e.x;
  s.location_y = e.y;
  return s;
}

/// Load every tile listed in a manifest.
inline std::vector<RasterSample> load_dataset(const std::string& root,
                                              const std::string& manifest_path) {
  namespace fs = std::filesystem;
  if (!fs::exists(root)) throw DataError("dataset root does not exist: " + root);
  std::vector<ManifestEntry> entries = load_manifest(manifest_path);

  std::vector<RasterSample> samples;
  samples.reserve(entries.size());
  for (const ManifestEntry& e : entries) samples.push_back(load_sample(root, e));
  return samples;
}

inline void save_manifest(const std::string& path,
                          const std::vector<ManifestEntry>& entries) {
  io::CsvWriter w({"file", "label", "category", "lon", "lat"});
  for (const auto& e : entries)
    w.row(e.file, e.label, e.category, e.x, e.y);
  io::write_file_atomic(path, w.str());
}

}  // namespace asos::data
