#pragma once

#include <functional>
#include <vector>

#include "asos/nn/model.hpp"
#include "asos/space/index.hpp"
#include "asos/tensor.hpp"

namespace asos::maps {

enum class Method { kAsos, kIios };

/// Per-pixel sensitivity field. Pixels with no defined value (below-threshold
/// cube, padding) carry defined = 0 and render grey.
struct SensitivityMap {
  Method method = Method::kAsos;
  Tensorf values;                 // (h, w)
  Tensor<std::uint8_t> defined;   // (h, w)
  float scale_bound = 0.0f;       // color scale half-range; 0 = derive

  std::size_t height() const { return values.dim(0); }
  std::size_t width() const { return values.dim(1); }
};

/// ASOS: one encoder-decoder pass, then a pure per-pixel cube lookup. Works
/// for any input whose sides divide by 16; no classifier involvement.
inline SensitivityMap asos_map(nn::EncoderDecoder& encdec,
                               const space::SensitivityIndex& index,
                               const Tensorf& image) {
  if (image.rank() != 3) throw DataError("asos_map expects a (c, h, w) image");
  Tensorf x({std::size_t(1), image.dim(0), image.dim(1), image.dim(2)});
  std::copy(image.begin(), image.end(), x.begin());
  Tensorf m = encdec.forward(x, false);
  const std::size_t n_m = m.dim(1), h = m.dim(2), w = m.dim(3);
  if (n_m != index.n_m)
    throw ConfigError("index dimensionality does not match the model");

  SensitivityMap out;
  out.method = Method::kAsos;
  out.values = Tensorf({h, w}, 0.0f);
  out.defined = Tensor<std::uint8_t>({h, w}, 0);
  std::vector<float> v(n_m);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) {
      for (std::size_t c = 0; c < n_m; ++c) v[c] = m(0, c, y, xx);
      const std::size_t cube = index.cube_of(v.data());
      if (index.qualifies[cube] && index.eta_defined[cube]) {
        out.values(y, xx) = index.eta[cube];
        out.defined(y, xx) = 1;
      }
    }
  return out;
}

struct IiosConfig {
  std::size_t l_patch = 8;
  std::size_t l_stride = 4;
  std::size_t tile = 256;
  std::size_t batch_size = 16;

  void validate() const {
    if (l_patch == 0 || l_stride == 0)
      throw ConfigError("patch and stride must be positive");
    if (l_stride > l_patch)
      throw ConfigError("stride must not exceed the patch edge");
    if (l_patch > tile) throw ConfigError("patch larger than the tile");
  }
};

/// Patch start offsets along one tile axis: stride steps, plus a final
/// flush-right position so the last pixels are always covered.
inline std::vector<std::size_t> patch_positions(std::size_t tile,
                                                std::size_t patch,
                                                std::size_t stride) {
  std::vector<std::size_t> pos;
  for (std::size_t p = 0; p + patch <= tile; p += stride) pos.push_back(p);
  if (pos.empty() || pos.back() + patch < tile)
    pos.push_back(tile - patch);
  return pos;
}

/// IIOS baseline: zero a sliding patch in the input, re-classify, spread
/// deviation (score change per occluded input pixel) over the covered
/// pixels, and negate the per-pixel mean. Images that do not divide into
/// classifier-sized tiles are zero-padded; padding is masked in the output.
/// `on_patch` (optional) observes every (tile_y0, tile_x0, py, px, delta).
inline SensitivityMap iios_map(
    nn::Model& model, const Tensorf& image, const IiosConfig& cfg,
    const std::function<void(std::size_t, std::size_t, std::size_t,
                             std::size_t, double)>& on_patch = nullptr) {
  cfg.validate();
  if (image.rank() != 3) throw DataError("iios_map expects a (c, h, w) image");
  if (cfg.tile != model.config.classifier_tile)
    throw ConfigError("IIOS tile size " + std::to_string(cfg.tile) +
                      " must match the classifier's bound size " +
                      std::to_string(model.config.classifier_tile));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::size_t th = (h + cfg.tile - 1) / cfg.tile;
  const std::size_t tw = (w + cfg.tile - 1) / cfg.tile;

  SensitivityMap out;
  out.method = Method::kIios;
  out.values = Tensorf({h, w}, 0.0f);
  out.defined = Tensor<std::uint8_t>({h, w}, 0);

  const auto pos = patch_positions(cfg.tile, cfg.l_patch, cfg.l_stride);
  const double patch_area = double(cfg.l_patch) * double(cfg.l_patch);

  std::vector<double> delta_sum(cfg.tile * cfg.tile);
  std::vector<std::uint32_t> delta_cnt(cfg.tile * cfg.tile);

  for (std::size_t ty = 0; ty < th; ++ty)
    for (std::size_t tx = 0; tx < tw; ++tx) {
      const std::size_t y0 = ty * cfg.tile, x0 = tx * cfg.tile;
      // Zero-padded tile extraction.
      Tensorf tile({std::size_t(1), c, cfg.tile, cfg.tile}, 0.0f);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < cfg.tile && y0 + y < h; ++y)
          for (std::size_t x = 0; x < cfg.tile && x0 + x < w; ++x)
            tile(0, ch, y, x) = image(ch, y0 + y, x0 + x);

      const float base = model.forward(tile, false)[0];

      std::fill(delta_sum.begin(), delta_sum.end(), 0.0);
      std::fill(delta_cnt.begin(), delta_cnt.end(), 0);

      // All patch positions for this tile, batched through the model.
      std::vector<std::pair<std::size_t, std::size_t>> queue;
      queue.reserve(pos.size() * pos.size());
      for (std::size_t py : pos)
        for (std::size_t px : pos) queue.emplace_back(py, px);

      for (std::size_t start = 0; start < queue.size();
           start += cfg.batch_size) {
        const std::size_t nb = std::min(cfg.batch_size, queue.size() - start);
        Tensorf batch({nb, c, cfg.tile, cfg.tile});
        for (std::size_t k = 0; k < nb; ++k) {
          std::copy(tile.begin(), tile.end(), &batch(k, 0, 0, 0));
          const auto [py, px] = queue[start + k];
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = py; y < py + cfg.l_patch; ++y)
              for (std::size_t x = px; x < px + cfg.l_patch; ++x)
                batch(k, ch, y, x) = 0.0f;
        }
        Tensorf scores = model.forward(batch, false);
        for (std::size_t k = 0; k < nb; ++k) {
          const auto [py, px] = queue[start + k];
          const double delta = (double(scores[k]) - double(base)) / patch_area;
          if (on_patch) on_patch(y0, x0, py, px, delta);
          for (std::size_t y = py; y < py + cfg.l_patch; ++y)
            for (std::size_t x = px; x < px + cfg.l_patch; ++x) {
              delta_sum[y * cfg.tile + x] += delta;
              delta_cnt[y * cfg.tile + x] += 1;
            }
        }
      }

      for (std::size_t y = 0; y < cfg.tile && y0 + y < h; ++y)
        for (std::size_t x = 0; x < cfg.tile && x0 + x < w; ++x) {
          const std::size_t p = y * cfg.tile + x;
          if (delta_cnt[p] == 0) continue;
          out.values(y0 + y, x0 + x) =
              float(-delta_sum[p] / double(delta_cnt[p]));
          out.defined(y0 + y, x0 + x) = 1;
        }
    }
  return out;
}

}  // namespace asos::maps
