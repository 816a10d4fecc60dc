#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "asos/io/binary.hpp"
#include "asos/io/csv.hpp"
#include "asos/space/cloud.hpp"

namespace asos::space {

/// Base population for the average-density threshold: occupied cubes only
/// (default) or every cube of the grid volume.
enum class DensityBase { kOccupied, kAll };

struct GridConfig {
  double l_cube = 0.1;
  double density_multiplier = 2.0;
  DensityBase density_base = DensityBase::kOccupied;
  std::size_t min_occluded = 10;  // records kept only when n_occ > this
  std::size_t frame = 10;

  void validate() const {
    if (l_cube <= 0.0 || l_cube > 2.0)
      throw ConfigError("l_cube must lie in (0, 2]");
    if (density_multiplier <= 0.0)
      throw ConfigError("density multiplier must be positive");
  }
};

/// Non-overlapping hypercube grid over [-1, 1]^n_m with per-cube densities,
/// qualification flags, and (after estimation) sensitivities.
struct SensitivityIndex {
  std::size_t n_m = 0;
  double l_cube = 0.1;
  std::size_t cells = 20;  // per axis
  GridConfig grid;
  std::size_t n_points = 0;   // cloud size used for densities
  std::size_t n_samples = 0;  // N, retained training samples
  double avg_density = 0.0;   // threshold base actually used

  std::vector<std::uint64_t> density;
  std::vector<std::uint8_t> qualifies;
  std::vector<float> eta;
  std::vector<std::uint8_t> eta_defined;
  // Activation counts by class accumulated during the occlusion pass.
  std::vector<std::uint64_t> class_acts[2];

  std::size_t n_cubes() const { return density.size(); }

  std::size_t axis_cell(float v) const {
    const double t = (double(v) + 1.0) / l_cube;
    auto c = std::ptrdiff_t(std::floor(t));
    if (c < 0) c = 0;
    if (c >= std::ptrdiff_t(cells)) c = std::ptrdiff_t(cells) - 1;
    return std::size_t(c);
  }

  /// Flat cube id of an activation vector (clamping ±1 into edge cells).
  std::size_t cube_of(const float* v) const {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < n_m; ++d) flat = flat * cells + axis_cell(v[d]);
    return flat;
  }

  std::vector<std::size_t> cube_coords(std::size_t flat) const {
    std::vector<std::size_t> c(n_m);
    for (std::size_t d = n_m; d-- > 0;) {
      c[d] = flat % cells;
      flat /= cells;
    }
    return c;
  }

  /// Cube center in activation coordinates.
  std::vector<double> cube_center(std::size_t flat) const {
    auto cc = cube_coords(flat);
    std::vector<double> v(n_m);
    for (std::size_t d = 0; d < n_m; ++d)
      v[d] = -1.0 + (double(cc[d]) + 0.5) * l_cube;
    return v;
  }
};

/// Count cloud points per cube and mark the qualifying set.
inline SensitivityIndex build_grid(const ActivationCloud& cloud,
                                   const GridConfig& cfg) {
  cfg.validate();
  if (cloud.n_points() == 0)
    throw DataError("cannot build a grid from an empty activation cloud");
  const double cells_f = 2.0 / cfg.l_cube;
  const double rounded = std::round(cells_f);
  if (std::abs(cells_f - rounded) > 1e-9 || rounded < 1.0)
    throw ConfigError("l_cube must divide the [-1, 1] range evenly; 2/" +
                      std::to_string(cfg.l_cube) + " is not integral");
  SensitivityIndex idx;
  idx.n_m = cloud.n_m;
  idx.l_cube = cfg.l_cube;
  idx.cells = std::size_t(rounded);
  idx.grid = cfg;

  double n_cubes_f = 1.0;
  for (std::size_t d = 0; d < idx.n_m; ++d) n_cubes_f *= double(idx.cells);
  if (n_cubes_f > 2e8)
    throw ConfigError("grid of " + std::to_string(idx.cells) + "^" +
                      std::to_string(idx.n_m) +
                      " cubes is too large to hold densely");
  const auto n_cubes = std::size_t(n_cubes_f);

  idx.density.assign(n_cubes, 0);
  idx.qualifies.assign(n_cubes, 0);
  idx.eta.assign(n_cubes, 0.0f);
  idx.eta_defined.assign(n_cubes, 0);
  idx.class_acts[0].assign(n_cubes, 0);
  idx.class_acts[1].assign(n_cubes, 0);

  for (std::size_t i = 0; i < cloud.n_points(); ++i)
    ++idx.density[idx.cube_of(cloud.point(i))];

  std::size_t occupied = 0;
  for (auto d : idx.density)
    if (d > 0) ++occupied;
  const double base =
      cfg.density_base == DensityBase::kOccupied ? double(occupied)
                                                 : double(n_cubes);
  idx.n_points = cloud.n_points();
  idx.avg_density = double(cloud.n_points()) / base;
  const double threshold = cfg.density_multiplier * idx.avg_density;
  for (std::size_t c = 0; c < n_cubes; ++c)
    idx.qualifies[c] = double(idx.density[c]) >= threshold ? 1 : 0;
  return idx;
}

/// Classifier adapter: maps a batch of activation maps (n, n_m, h, w) to
/// scores (n,). Production wraps the trained classifier; tests pass frozen
/// toy functions.
using BatchScorer = std::function<Tensorf(const Tensorf&)>;

/// Optional per-record tap for tests and CSV dumps.
using RecordCallback = std::function<void(
    std::size_t cube, std::size_t sample, std::size_t n_occ, double delta)>;

/// Occlude each qualifying cube's activations per sample, score, and reduce
/// deviations to per-cube sensitivities. Maps are streamed one sample at a
/// time; classifier passes are batched.
inline void estimate_sensitivities(const BatchScorer& score,
                                   const MapStore& maps,
                                   const std::vector<float>& baseline,
                                   const std::vector<float>& labels,
                                   SensitivityIndex& idx,
                                   std::size_t batch_size = 16,
                                   const RecordCallback& on_record = nullptr) {
  if (maps.size() != baseline.size() || maps.size() != labels.size())
    throw ConfigError("maps, baselines, and labels must align");
  const std::size_t n_cubes = idx.n_cubes();
  std::vector<double> delta_sum(n_cubes, 0.0);
  std::vector<std::uint64_t> delta_n(n_cubes, 0);
  idx.class_acts[0].assign(n_cubes, 0);
  idx.class_acts[1].assign(n_cubes, 0);

  const auto& shape = maps.shape();
  const std::size_t n_m = shape[0], h = shape[1], w = shape[2];
  if (n_m != idx.n_m)
    throw ConfigError("map channel count differs from index dimensionality");
  const std::size_t frame = idx.grid.frame;
  if (2 * frame >= h || 2 * frame >= w)
    throw ConfigError("frame leaves no map interior");

  idx.n_samples = maps.size();

  // One batch holds occluded copies of the current sample's map, one per
  // cube that passes the n_occ threshold.
  Tensorf batch({batch_size, n_m, h, w});
  std::vector<std::size_t> batch_cubes;
  std::vector<std::size_t> batch_nocc;

  for (std::size_t s = 0; s < maps.size(); ++s) {
    const Tensorf map = maps.get(s);
    const int cls = labels[s] >= 0.5f ? 1 : 0;

    // Bucket eligible pixels of qualifying cubes.
    std::map<std::size_t, std::vector<std::uint32_t>> pix;
    std::vector<float> v(n_m);
    for (std::size_t y = frame; y < h - frame; ++y)
      for (std::size_t x = frame; x < w - frame; ++x) {
        for (std::size_t c = 0; c < n_m; ++c) v[c] = map(c, y, x);
        const std::size_t cube = idx.cube_of(v.data());
        idx.class_acts[cls][cube] += 1;
        if (idx.qualifies[cube])
          pix[cube].push_back(std::uint32_t(y * w + x));
      }

    auto flush = [&](std::size_t count) {
      if (count == 0) return;
      Tensorf view({count, n_m, h, w});
      std::copy(batch.begin(), batch.begin() + count * n_m * h * w,
                view.begin());
      Tensorf scores = score(view);
      for (std::size_t k = 0; k < count; ++k) {
        const double delta = (double(scores[k]) - double(baseline[s])) /
                             double(batch_nocc[k]);
        delta_sum[batch_cubes[k]] += delta;
        delta_n[batch_cubes[k]] += 1;
        if (on_record)
          on_record(batch_cubes[k], s, batch_nocc[k], delta);
      }
      batch_cubes.clear();
      batch_nocc.clear();
    };

    std::size_t fill = 0;
    for (const auto& [cube, positions] : pix) {
      if (positions.size() <= idx.grid.min_occluded) continue;
      float* dst = &batch(fill, 0, 0, 0);
      std::copy(map.begin(), map.end(), dst);
      for (const std::uint32_t p : positions)
        for (std::size_t c = 0; c < n_m; ++c) dst[c * h * w + p] = 0.0f;
      batch_cubes.push_back(cube);
      batch_nocc.push_back(positions.size());
      ++fill;
      if (fill == batch_size) {
        flush(fill);
        fill = 0;
      }
    }
    flush(fill);
  }

  for (std::size_t c = 0; c < n_cubes; ++c) {
    if (!idx.qualifies[c] || delta_n[c] == 0) continue;
    idx.eta[c] = float(-delta_sum[c] / double(delta_n[c]));
    idx.eta_defined[c] = 1;
  }
}

inline BatchScorer scorer_from_model(nn::Model& model) {
  return [&model](const Tensorf& batch) {
    return model.classifier.forward(batch, false);
  };
}

// ----- serialization ------------------------------------------------------

inline constexpr char kIndexMagic[8] = {'A', 'S', 'O', 'S',
                                        'I', 'N', 'D', 'X'};
inline constexpr std::uint32_t kIndexVersion = 1;

inline void save_index(const std::string& path, const SensitivityIndex& idx) {
  std::string out;
  out.append(kIndexMagic, sizeof(kIndexMagic));
  io::write_le<std::uint32_t>(out, kIndexVersion);
  nlohmann::json meta = {
      {"n_m", idx.n_m},
      {"l_cube", idx.l_cube},
      {"cells", idx.cells},
      {"density_multiplier", idx.grid.density_multiplier},
      {"density_base",
       idx.grid.density_base == DensityBase::kOccupied ? "occupied" : "all"},
      {"min_occluded", idx.grid.min_occluded},
      {"frame", idx.grid.frame},
      {"n_points", idx.n_points},
      {"n_samples", idx.n_samples},
      {"avg_density", idx.avg_density}};
  const std::string meta_s = meta.dump();
  io::write_le<std::uint64_t>(out, meta_s.size());
  out.append(meta_s);
  io::write_le<std::uint64_t>(out, idx.n_cubes());
  auto blob = [&](const void* p, std::size_t bytes) {
    const std::size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, p, bytes);
  };
  blob(idx.density.data(), idx.n_cubes() * sizeof(std::uint64_t));
  blob(idx.qualifies.data(), idx.n_cubes());
  blob(idx.eta.data(), idx.n_cubes() * sizeof(float));
  blob(idx.eta_defined.data(), idx.n_cubes());
  blob(idx.class_acts[0].data(), idx.n_cubes() * sizeof(std::uint64_t));
  blob(idx.class_acts[1].data(), idx.n_cubes() * sizeof(std::uint64_t));
  io::write_file_atomic(path, out);
}

inline SensitivityIndex load_index(const std::string& path) {
  const std::string buf = io::read_file_string(path);
  std::size_t pos = 0;
  if (buf.size() < sizeof(kIndexMagic) ||
      std::memcmp(buf.data(), kIndexMagic, sizeof(kIndexMagic)) != 0)
    throw DataError("not a sensitivity index: " + path);
  pos += sizeof(kIndexMagic);
  const auto version = io::read_le<std::uint32_t>(buf, pos);
  if (version != kIndexVersion)
    throw DataError("unsupported index version " + std::to_string(version));
  const auto meta_len = io::read_le<std::uint64_t>(buf, pos);
  if (pos + meta_len > buf.size()) throw DataError("index truncated: " + path);
  SensitivityIndex idx;
  try {
    const auto meta = nlohmann::json::parse(buf.substr(pos, meta_len));
    idx.n_m = meta.at("n_m").get<std::size_t>();
    idx.l_cube = meta.at("l_cube").get<double>();
    idx.cells = meta.at("cells").get<std::size_t>();
    idx.grid.l_cube = idx.l_cube;
    idx.grid.density_multiplier = meta.at("density_multiplier").get<double>();
    idx.grid.density_base = meta.at("density_base").get<std::string>() == "all"
                                ? DensityBase::kAll
                                : DensityBase::kOccupied;
    idx.grid.min_occluded = meta.at("min_occluded").get<std::size_t>();
    idx.grid.frame = meta.at("frame").get<std::size_t>();
    idx.n_points = meta.at("n_points").get<std::size_t>();
    idx.n_samples = meta.at("n_samples").get<std::size_t>();
    idx.avg_density = meta.at("avg_density").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad index metadata: ") + e.what());
  }
  pos += meta_len;
  const auto n_cubes = io::read_le<std::uint64_t>(buf, pos);
  auto blob = [&](void* p, std::size_t bytes) {
    if (pos + bytes > buf.size()) throw DataError("index truncated: " + path);
    std::memcpy(p, buf.data() + pos, bytes);
    pos += bytes;
  };
  idx.density.resize(n_cubes);
  idx.qualifies.resize(n_cubes);
  idx.eta.resize(n_cubes);
  idx.eta_defined.resize(n_cubes);
  idx.class_acts[0].resize(n_cubes);
  idx.class_acts[1].resize(n_cubes);
  blob(idx.density.data(), n_cubes * sizeof(std::uint64_t));
  blob(idx.qualifies.data(), n_cubes);
  blob(idx.eta.data(), n_cubes * sizeof(float));
  blob(idx.eta_defined.data(), n_cubes);
  blob(idx.class_acts[0].data(), n_cubes * sizeof(std::uint64_t));
  blob(idx.class_acts[1].data(), n_cubes * sizeof(std::uint64_t));
  return idx;
}

/// Human-readable dump: one row per occupied or qualifying cube.
inline std::string index_to_csv(const SensitivityIndex& idx) {
  std::vector<std::string> header{"cube"};
  for (std::size_t d = 0; d < idx.n_m; ++d)
    header.push_back("center_" + std::to_string(d));
  header.insert(header.end(), {"density", "qualifies", "eta", "eta_defined",
                               "class0_acts", "class1_acts"});
  io::CsvWriter csv(header);
  for (std::size_t c = 0; c < idx.n_cubes(); ++c) {
    if (idx.density[c] == 0 && !idx.qualifies[c] && !idx.eta_defined[c])
      continue;
    std::vector<std::string> row{std::to_string(c)};
    for (double v : idx.cube_center(c)) {
      std::ostringstream os;
      os.precision(10);
      os << v;
      row.push_back(os.str());
    }
    row.push_back(std::to_string(idx.density[c]));
    row.push_back(std::to_string(int(idx.qualifies[c])));
    {
      std::ostringstream os;
      os.precision(10);
      os << idx.eta[c];
      row.push_back(idx.eta_defined[c] ? os.str() : "");
    }
    row.push_back(std::to_string(int(idx.eta_defined[c])));
    row.push_back(std::to_string(idx.class_acts[0][c]));
    row.push_back(std::to_string(idx.class_acts[1][c]));
    csv.raw_row(row);
  }
  return csv.str();
}

}  // namespace asos::space
