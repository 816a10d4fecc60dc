#pragma once

#include <cstdint>
#include <random>

#include "asos/data/sample.hpp"
#include "asos/tensor.hpp"

namespace asos::train {

/// Rescale raw counts into [0, 1]. Values above the reflectance ceiling are
/// rejected rather than clamped; they indicate a bad source raster.
inline Tensorf scale_input(const Tensor<std::uint16_t>& pixels) {
  Tensorf out(pixels.shape());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (pixels[i] > data::kMaxReflectance)
      throw DataError("pixel value " + std::to_string(pixels[i]) +
                      " exceeds " + std::to_string(data::kMaxReflectance));
    out[i] = float(pixels[i]) / float(data::kMaxReflectance);
  }
  return out;
}

/// Rotate a (c, h, w) raster counter-clockwise by `quarter` 90-degree turns.
template <typename T>
Tensor<T> rotate90(const Tensor<T>& x, int quarter) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  quarter = ((quarter % 4) + 4) % 4;
  if (quarter == 0) return x;
  const bool swap = quarter % 2 == 1;
  Tensor<T> y(swap ? std::vector<std::size_t>{c, w, h}
                   : std::vector<std::size_t>{c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        switch (quarter) {
          case 1: y(ch, w - 1 - j, i) = x(ch, i, j); break;
          case 2: y(ch, h - 1 - i, w - 1 - j) = x(ch, i, j); break;
          default: y(ch, j, h - 1 - i) = x(ch, i, j); break;
        }
      }
  return y;
}

enum class Edge { kTop = 0, kBottom = 1, kLeft = 2, kRight = 3 };

/// Paste a `width`-pixel stripe of `b` along `edge` into `a` and mix the
/// label by the pasted pixel fraction. Returns the mixed label.
template <typename T>
float cutmix_paste(Tensor<T>& a, float label_a, const Tensor<T>& b,
                   float label_b, Edge edge, std::size_t width) {
  if (!a.same_shape(b)) throw DataError("cutmix inputs have different shapes");
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  std::size_t pasted = 0;
  switch (edge) {
    case Edge::kTop:
    case Edge::kBottom: {
      if (width > h) throw DataError("cutmix stripe wider than tile");
      const std::size_t i0 = edge == Edge::kTop ? 0 : h - width;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = i0; i < i0 + width; ++i)
          for (std::size_t j = 0; j < w; ++j) a(ch, i, j) = b(ch, i, j);
      pasted = width * w;
      break;
    }
    case Edge::kLeft:
    case Edge::kRight: {
      if (width > w) throw DataError("cutmix stripe wider than tile");
      const std::size_t j0 = edge == Edge::kLeft ? 0 : w - width;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = j0; j < j0 + width; ++j)
            a(ch, i, j) = b(ch, i, j);
      pasted = width * h;
      break;
    }
  }
  const float f = float(pasted) / float(h * w);
  return (1.0f - f) * label_a + f * label_b;
}

/// Bernoulli occlusion mask over spatial positions: mask(i, y, x) is 0 with
/// probability `rate`, else 1. One draw per position, shared by all channels.
inline Tensorf make_occlusion_mask(std::size_t n, std::size_t h, std::size_t w,
                                   float rate, std::mt19937_64& rng) {
  Tensorf mask({n, h, w});
  std::bernoulli_distribution drop(rate);
  for (auto& v : mask) v = drop(rng) ? 0.0f : 1.0f;
  return mask;
}

/// Zero whole activation vectors where the mask is 0. Used on the map between
/// the encoder-decoder and the classifier, and on the gradient coming back.
inline void apply_occlusion(Tensorf& m, const Tensorf& mask) {
  const std::size_t n = m.dim(0), c = m.dim(1), h = m.dim(2), w = m.dim(3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      float* mp = &m(i, ch, 0, 0);
      const float* kp = &mask(i, 0, 0);
      for (std::size_t p = 0; p < h * w; ++p) mp[p] *= kp[p];
    }
}

}  // namespace asos::train
