#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "asos/io/png.hpp"
#include "asos/maps/sensitivity.hpp"

namespace asos::maps {

struct Rgb {
  std::uint8_t r, g, b;
};

inline constexpr Rgb kPurple{94, 60, 153};   // negative: anthropogenic
inline constexpr Rgb kBeige{245, 245, 220};  // zero
inline constexpr Rgb kGreen{0, 136, 55};     // positive: wild
inline constexpr Rgb kGrey{128, 128, 128};   // undetermined
inline constexpr Rgb kInk{32, 32, 32};       // text, overlay boundaries

/// Diverging purple-beige-green ramp; t in [0, 1], 0.5 maps to beige.
inline Rgb diverging_color(float t) {
  t = std::clamp(t, 0.0f, 1.0f);
  const auto lerp = [](std::uint8_t a, std::uint8_t b, float u) {
    return static_cast<std::uint8_t>(std::lround(a + (b - a) * u));
  };
  const Rgb lo = t < 0.5f ? kPurple : kBeige;
  const Rgb hi = t < 0.5f ? kBeige : kGreen;
  const float u = t < 0.5f ? t * 2.0f : (t - 0.5f) * 2.0f;
  return {lerp(lo.r, hi.r, u), lerp(lo.g, hi.g, u), lerp(lo.b, hi.b, u)};
}

namespace detail {

// 5x7 bitmap glyphs, one byte per row, 5 low bits used (MSB = left column).
inline const std::array<std::uint8_t, 7>* glyph(char c) {
  static const struct {
    char c;
    std::array<std::uint8_t, 7> rows;
  } kFont[] = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x0E, 0x11, 0x01, 0x06, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
      {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
      {'x', {0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11}},
      {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
  };
  for (const auto& g : kFont)
    if (g.c == c) return &g.rows;
  return nullptr;  // unsupported chars render as blanks
}

inline std::size_t text_width(const std::string& s) {
  return s.empty() ? 0 : s.size() * 6 - 1;
}

inline void put_text(io::RgbImage& img, std::size_t x, std::size_t y,
                     const std::string& s, Rgb color = kInk) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto* rows = glyph(s[i]);
    if (!rows) continue;
    for (std::size_t ry = 0; ry < 7; ++ry)
      for (std::size_t rx = 0; rx < 5; ++rx) {
        if (!(((*rows)[ry] >> (4 - rx)) & 1)) continue;
        const std::size_t px = x + i * 6 + rx, py = y + ry;
        if (py < img.height && px < img.width)
          img.set(py, px, color.r, color.g, color.b);
      }
  }
}

inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.3g", v);
  return buf;
}

}  // namespace detail

/// Symmetric color-scale half-range via the nearest-rank percentile of the
/// absolute defined values (default: 98th, clipping the top 2% magnitudes).
inline float derive_scale_bound(const SensitivityMap& map,
                                double percentile = 0.98) {
  std::vector<float> mags;
  mags.reserve(map.values.size());
  for (std::size_t i = 0; i < map.values.size(); ++i)
    if (map.defined[i]) mags.push_back(std::fabs(map.values[i]));
  if (mags.empty()) return 0.0f;
  std::sort(mags.begin(), mags.end());
  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(percentile * mags.size())));
  return mags[std::min(k, mags.size()) - 1];
}

struct RenderOptions {
  float scale_bound = 0.0f;      // 0: use map's bound, else percentile rule
  double percentile = 0.98;
  float scale_multiplier = 1.0f; // stretches the bound; announced in legend
  bool legend = true;
};

struct Rendered {
  io::RgbImage image;
  float bound = 0.0f;  // effective half-range after the multiplier
};

/// Rasterize a sensitivity map: diverging purple-beige-green over
/// [-bound, +bound], grey where undetermined, optional class-boundary
/// overlay, optional legend strip with a gradient bar and end labels.
inline Rendered render(const SensitivityMap& map,
                       const RenderOptions& opt = {},
                       const Tensor<std::uint16_t>* overlay = nullptr) {
  const std::size_t h = map.height(), w = map.width();
  if (h == 0 || w == 0) throw DataError("cannot render an empty map");
  if (overlay && !(overlay->rank() == 2 && overlay->dim(0) == h &&
                   overlay->dim(1) == w))
    throw DataError("overlay raster shape does not match the map");

  float base = opt.scale_bound;
  if (base <= 0.0f) base = map.scale_bound;
  if (base <= 0.0f) base = derive_scale_bound(map, opt.percentile);
  if (base <= 0.0f) base = 1.0f;  // all-zero map: everything lands on beige
  const float bound = base * opt.scale_multiplier;

  const std::size_t legend_h = opt.legend ? 30 : 0;
  io::RgbImage img(h + legend_h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      Rgb c = kGrey;
      if (map.defined(y, x))
        c = diverging_color((map.values(y, x) + bound) / (2.0f * bound));
      img.set(y, x, c.r, c.g, c.b);
    }

  if (overlay) {
    const auto& ov = *overlay;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const bool edge = (y + 1 < h && ov(y, x) != ov(y + 1, x)) ||
                          (x + 1 < w && ov(y, x) != ov(y, x + 1));
        if (edge) img.set(y, x, kInk.r, kInk.g, kInk.b);
      }
  }

  if (opt.legend) {
    for (std::size_t y = h; y < h + legend_h; ++y)
      for (std::size_t x = 0; x < w; ++x) img.set(y, x, 255, 255, 255);
    const std::size_t bar_y = h + 3, bar_h = 8;
    const std::size_t margin = std::min<std::size_t>(4, w / 8);
    for (std::size_t x = margin; x + margin < w; ++x) {
      const float t =
          w > 2 * margin + 1
              ? float(x - margin) / float(w - 2 * margin - 1)
              : 0.5f;
      const Rgb c = diverging_color(t);
      for (std::size_t y = bar_y; y < bar_y + bar_h; ++y)
        img.set(y, x, c.r, c.g, c.b);
    }
    std::string left = detail::format_value(-double(bound));
    std::string right = detail::format_value(double(bound));
    if (opt.scale_multiplier != 1.0f) {
      char buf[24];
      std::snprintf(buf, sizeof(buf), " (x%g)", double(opt.scale_multiplier));
      right += buf;
    }
    const std::size_t text_y = bar_y + bar_h + 3;
    detail::put_text(img, margin, text_y, left);
    detail::put_text(img, w / 2 > 2 ? w / 2 - 2 : 0, text_y, "0");
    const std::size_t rw = detail::text_width(right);
    detail::put_text(img, w > rw + margin ? w - rw - margin : 0, text_y,
                     right);
  }
  return {std::move(img), bound};
}

}  // namespace asos::maps
