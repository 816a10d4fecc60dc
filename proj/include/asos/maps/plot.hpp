#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "asos/maps/render.hpp"
#include "asos/space/cloud.hpp"
#include "asos/space/index.hpp"

namespace asos::maps {

/// Percentile half-range over the defined, qualifying cube sensitivities.
inline float index_scale_bound(const space::SensitivityIndex& idx,
                               double percentile = 0.98) {
  std::vector<float> mags;
  for (std::size_t c = 0; c < idx.n_cubes(); ++c)
    if (idx.qualifies[c] && idx.eta_defined[c])
      mags.push_back(std::fabs(idx.eta[c]));
  if (mags.empty()) return 1.0f;
  std::sort(mags.begin(), mags.end());
  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(percentile * mags.size())));
  const float s = mags[std::min(k, mags.size()) - 1];
  return s > 0.0f ? s : 1.0f;
}

namespace detail {

inline Rgb cube_color(const space::SensitivityIndex& idx, std::size_t cube,
                      float bound) {
  if (idx.density[cube] == 0) return {255, 255, 255};
  if (!idx.qualifies[cube] || !idx.eta_defined[cube]) return kGrey;
  return diverging_color((idx.eta[cube] + bound) / (2.0f * bound));
}

inline void dot(io::RgbImage& img, long cy, long cx, Rgb c) {
  for (long dy = 0; dy < 2; ++dy)
    for (long dx = 0; dx < 2; ++dx) {
      const long y = cy + dy, x = cx + dx;
      if (y >= 0 && x >= 0 && y < long(img.height) && x < long(img.width))
        img.set(std::size_t(y), std::size_t(x), c.r, c.g, c.b);
    }
}

inline void line(io::RgbImage& img, double y0, double x0, double y1,
                 double x1, Rgb c) {
  const double len = std::max(std::fabs(y1 - y0), std::fabs(x1 - x0));
  const int steps = std::max(1, int(std::ceil(len)));
  for (int i = 0; i <= steps; ++i) {
    const double t = double(i) / steps;
    const long y = std::lround(y0 + (y1 - y0) * t);
    const long x = std::lround(x0 + (x1 - x0) * t);
    if (y >= 0 && x >= 0 && y < long(img.height) && x < long(img.width))
      img.set(std::size_t(y), std::size_t(x), c.r, c.g, c.b);
  }
}

}  // namespace detail

/// n_m = 1: per-cell histogram of the activation cloud, bars colored by the
/// cell's sensitivity (grey when undetermined, hatched baseline otherwise).
inline io::RgbImage plot_histogram(const space::SensitivityIndex& idx,
                                   std::size_t size = 600) {
  if (idx.n_m != 1) throw ConfigError("histogram plot requires n_m = 1");
  const std::size_t cells = idx.cells;
  const std::size_t margin = 24, ph = size * 2 / 3;
  io::RgbImage img(ph + 2 * margin, size + 2 * margin);
  std::fill(img.pixels.begin(), img.pixels.end(), 255);

  std::uint64_t peak = 1;
  for (std::size_t c = 0; c < cells; ++c)
    peak = std::max(peak, idx.density[c]);
  const float bound = index_scale_bound(idx);

  const double bw = double(size) / cells;
  for (std::size_t c = 0; c < cells; ++c) {
    const std::size_t bh =
        std::size_t(std::llround(double(idx.density[c]) / peak * ph));
    const Rgb col = detail::cube_color(idx, c, bound);
    const std::size_t x0 = margin + std::size_t(c * bw);
    const std::size_t x1 = margin + std::size_t((c + 1) * bw) - 1;
    for (std::size_t y = 0; y < bh; ++y)
      for (std::size_t x = x0; x <= x1 && x < img.width; ++x)
        img.set(margin + ph - 1 - y, x, col.r, col.g, col.b);
  }
  detail::line(img, margin + ph, margin, margin + ph, margin + size, kInk);
  detail::put_text(img, margin, margin + ph + 6, "-1");
  detail::put_text(img, margin + size / 2 - 2, margin + ph + 6, "0");
  detail::put_text(img, margin + size - 8, margin + ph + 6, "+1");
  return img;
}

/// n_m = 2: the activation plane with cube cells shaded by sensitivity and a
/// subsample of cloud points drawn on top.
inline io::RgbImage plot_plane(const space::ActivationCloud& cloud,
                               const space::SensitivityIndex& idx,
                               std::size_t size = 600) {
  if (idx.n_m != 2) throw ConfigError("plane plot requires n_m = 2");
  const std::size_t margin = 24;
  io::RgbImage img(size + 2 * margin, size + 2 * margin);
  std::fill(img.pixels.begin(), img.pixels.end(), 255);
  const float bound = index_scale_bound(idx);

  const double px_per_unit = size / 2.0;
  // Axis 0 is horizontal, axis 1 vertical (up). Shade per screen pixel.
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      float v[2] = {float(-1.0 + (x + 0.5) / px_per_unit),
                    float(1.0 - (y + 0.5) / px_per_unit)};
      const Rgb c = detail::cube_color(idx, idx.cube_of(v), bound);
      img.set(margin + y, margin + x, c.r, c.g, c.b);
    }
  for (std::size_t i = 0; i < cloud.n_points(); ++i) {
    const float* p = cloud.point(i);
    const long x = std::lround(margin + (p[0] + 1.0) * px_per_unit);
    const long y = std::lround(margin + (1.0 - p[1]) * px_per_unit);
    detail::dot(img, y, x, kInk);
  }
  detail::put_text(img, margin, margin + size + 6, "-1");
  detail::put_text(img, margin + size - 8, margin + size + 6, "+1");
  return img;
}

/// n_m = 3: fixed-angle orthographic scatter of the cloud inside the
/// [-1, 1]^3 wireframe, points colored by their cube's sensitivity and
/// drawn back to front.
inline io::RgbImage plot_scatter3(const space::ActivationCloud& cloud,
                                  const space::SensitivityIndex& idx,
                                  std::size_t size = 600) {
  if (idx.n_m != 3) throw ConfigError("3-d scatter plot requires n_m = 3");
  const double yaw = 35.0 * std::numbers::pi / 180.0;
  const double pitch = 25.0 * std::numbers::pi / 180.0;
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);

  const auto project = [&](double x, double y, double z) {
    const double rx = cy * x + sy * z;
    const double rz = -sy * x + cy * z;
    const double ry = cp * y - sp * rz;
    const double depth = sp * y + cp * rz;
    return std::array<double, 3>{rx, ry, depth};
  };

  const std::size_t margin = 24;
  const double half = size / 2.0, scale = half / 1.9;
  io::RgbImage img(size + 2 * margin, size + 2 * margin);
  std::fill(img.pixels.begin(), img.pixels.end(), 255);

  const auto screen = [&](const std::array<double, 3>& p) {
    return std::pair<double, double>{margin + half - p[1] * scale,
                                     margin + half + p[0] * scale};
  };

  static const int kCorners[8][3] = {{-1, -1, -1}, {1, -1, -1}, {-1, 1, -1},
                                     {1, 1, -1},   {-1, -1, 1}, {1, -1, 1},
                                     {-1, 1, 1},   {1, 1, 1}};
  static const int kEdges[12][2] = {{0, 1}, {0, 2}, {0, 4}, {3, 1},
                                    {3, 2}, {3, 7}, {5, 1}, {5, 4},
                                    {5, 7}, {6, 2}, {6, 4}, {6, 7}};
  for (const auto& e : kEdges) {
    const auto a = screen(project(kCorners[e[0]][0], kCorners[e[0]][1],
                                  kCorners[e[0]][2]));
    const auto b = screen(project(kCorners[e[1]][0], kCorners[e[1]][1],
                                  kCorners[e[1]][2]));
    detail::line(img, a.first, a.second, b.first, b.second, {200, 200, 200});
  }

  const float bound = index_scale_bound(idx);
  std::vector<std::size_t> order(cloud.n_points());
  std::vector<float> depth(cloud.n_points());
  for (std::size_t i = 0; i < cloud.n_points(); ++i) {
    const float* p = cloud.point(i);
    order[i] = i;
    depth[i] = float(project(p[0], p[1], p[2])[2]);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return depth[a] > depth[b];  // far points first
  });
  for (const std::size_t i : order) {
    const float* p = cloud.point(i);
    Rgb c = detail::cube_color(idx, idx.cube_of(p), bound);
    if (c.r == 255 && c.g == 255 && c.b == 255) c = kGrey;
    const auto s = screen(project(p[0], p[1], p[2]));
    detail::dot(img, std::lround(s.first), std::lround(s.second), c);
  }
  return img;
}

/// Dispatch on dimensionality; higher n_m has no plot form here.
inline io::RgbImage plot_activation_space(const space::ActivationCloud& cloud,
                                          const space::SensitivityIndex& idx,
                                          std::size_t size = 600) {
  switch (idx.n_m) {
    case 1:
      return plot_histogram(idx, size);
    case 2:
      return plot_plane(cloud, idx, size);
    case 3:
      return plot_scatter3(cloud, idx, size);
    default:
      throw ConfigError("activation-space plots support n_m in {1, 2, 3}");
  }
}

}  // namespace asos::maps
