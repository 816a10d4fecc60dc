#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "asos/data/sample.hpp"

namespace asos::data {

/// Parameters for the procedural two-class dataset. Class A (label 0) tiles
/// are high-frequency oriented stripes, class B (label 1) tiles are smooth
/// low-frequency blobs; base levels differ so even per-tile channel means
/// separate the classes. Locations form a jittered grid of small groups so
/// the spatial split has real clusters to work with.
struct SynthConfig {
  std::size_t n_per_class = 200;
  std::size_t tile = 64;
  std::size_t channels = 3;
  std::uint64_t seed = 0;

  struct TextureParams {
    double base_level;  // mean reflectance counts
    double amplitude;   // texture amplitude, counts
    double frequency;   // stripes: cycles per tile; blobs: bump count
  };
  TextureParams stripes{2800.0, 1300.0, 12.0};  // class A
  TextureParams blobs{5200.0, 1800.0, 6.0};     // class B
  double noise_sigma = 300.0;

  double group_spacing_m = 40000.0;  // grid pitch of sample groups
  double group_jitter_m = 5000.0;
  double within_group_sigma_m = 2000.0;
  std::size_t group_size = 10;

  void validate() const {
    if (n_per_class < 2)
      throw ConfigError("synthetic dataset needs at least 2 samples per class");
    if (tile < 64) throw ConfigError("synthetic tile size must be >= 64");
    if (channels < 1) throw ConfigError("synthetic channels must be >= 1");
  }
};

namespace detail {

inline std::uint16_t clamp_counts(double v) {
  if (v < 0.0) return 0;
  if (v > kMaxReflectance) return kMaxReflectance;
  return static_cast<std::uint16_t>(std::lround(v));
}

// Per-channel gain ramp so bands are correlated but not identical.
inline double channel_gain(std::size_t c, std::size_t n) {
  return n == 1 ? 1.0 : 0.8 + 0.4 * static_cast<double>(c) / (n - 1);
}

inline Tensor<std::uint16_t> stripe_tile(const SynthConfig& cfg,
                                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  const double base = cfg.stripes.base_level + (u01(rng) - 0.5) * 600.0;
  const double theta = u01(rng) * 3.14159265358979323846;
  const double cycles = cfg.stripes.frequency * (0.75 + 0.5 * u01(rng));
  const double period = static_cast<double>(cfg.tile) / cycles;
  const double phase = u01(rng) * 6.28318530717958647692;
  const double cth = std::cos(theta), sth = std::sin(theta);

  Tensor<std::uint16_t> t({cfg.channels, cfg.tile, cfg.tile});
  for (std::size_t y = 0; y < cfg.tile; ++y)
    for (std::size_t x = 0; x < cfg.tile; ++x) {
      const double proj = (x * cth + y * sth) / period * 6.28318530717958647692;
      const double stripe = std::sin(proj + phase) >= 0.0 ? 1.0 : -1.0;
      const double n = noise(rng);
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        const double g = channel_gain(c, cfg.channels);
        t(c, y, x) =
            clamp_counts(g * (base + cfg.stripes.amplitude * stripe) + n);
      }
    }
  return t;
}

inline Tensor<std::uint16_t> blob_tile(const SynthConfig& cfg,
                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  const double base = cfg.blobs.base_level + (u01(rng) - 0.5) * 600.0;
  const std::size_t n_bumps = static_cast<std::size_t>(cfg.blobs.frequency);

  struct Bump {
    double cx, cy, inv2s2, amp;
  };
  std::vector<Bump> bumps(n_bumps);
  for (Bump& b : bumps) {
    b.cx = u01(rng) * cfg.tile;
    b.cy = u01(rng) * cfg.tile;
    const double sigma = cfg.tile * (0.125 + 0.2 * u01(rng));
    b.inv2s2 = 1.0 / (2.0 * sigma * sigma);
    b.amp = (u01(rng) < 0.5 ? -1.0 : 1.0) * cfg.blobs.amplitude *
            (0.5 + 0.5 * u01(rng));
  }

  Tensor<std::uint16_t> t({cfg.channels, cfg.tile, cfg.tile});
  for (std::size_t y = 0; y < cfg.tile; ++y)
    for (std::size_t x = 0; x < cfg.tile; ++x) {
      double field = 0.0;
      for (const Bump& b : bumps) {
        const double dx = x - b.cx, dy = y - b.cy;
        field += b.amp * std::exp(-(dx * dx + dy * dy) * b.inv2s2);
      }
      const double n = noise(rng);
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        const double g = channel_gain(c, cfg.channels);
        t(c, y, x) = clamp_counts(g * (base + field) + n);
      }
    }
  return t;
}

}  // namespace detail

/// Deterministic procedural dataset. Each tile draws from its own RNG stream
/// derived from (seed, class, index), so outputs are bit-identical for a
/// given config regardless of generation order.
inline std::vector<RasterSample> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<RasterSample> samples;
  samples.reserve(2 * cfg.n_per_class);

  for (int cls = 0; cls < 2; ++cls) {
    const std::size_t n_groups =
        std::max<std::size_t>(1, cfg.n_per_class / cfg.group_size);
    const std::size_t grid =
        static_cast<std::size_t>(std::ceil(std::sqrt(double(n_groups))));

    for (std::size_t i = 0; i < cfg.n_per_class; ++i) {
      std::mt19937_64 rng(
          derive_seed(cfg.seed, static_cast<std::uint64_t>(cls) * 1000003 + i));
      RasterSample s;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%c_%05zu", cls == 0 ? 'a' : 'b', i);
      s.id = buf;
      s.label = static_cast<float>(cls);
      s.category = cls == 0 ? "synthetic-A" : "synthetic-B";
      s.pixels = cls == 0 ? detail::stripe_tile(cfg, rng)
                          : detail::blob_tile(cfg, rng);

      // Group index is deterministic in i; class B's grid is offset by half
      // a pitch so the two classes interleave on the map.
      const std::size_t g = i % n_groups;
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      std::mt19937_64 grng(derive_seed(
          cfg.seed, 7000000 + static_cast<std::uint64_t>(cls) * 100000 + g));
      const double jx = (u01(grng) - 0.5) * 2.0 * cfg.group_jitter_m;
      const double jy = (u01(grng) - 0.5) * 2.0 * cfg.group_jitter_m;
      const double offset = cls == 0 ? 0.0 : cfg.group_spacing_m / 2.0;
      std::normal_distribution<double> scatter(0.0, cfg.within_group_sigma_m);
      s.location_x = (g % grid) * cfg.group_spacing_m + offset + jx + scatter(rng);
      s.location_y = (g / grid) * cfg.group_spacing_m + offset + jy + scatter(rng);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

}  // namespace asos::data
