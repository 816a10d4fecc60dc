#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "asos/data/source.hpp"
#include "asos/io/npy.hpp"
#include "asos/nn/model.hpp"
#include "asos/train/augment.hpp"

namespace asos::space {

/// Subsampled activation points of correctly classified training samples.
/// Coordinates are interleaved (n_points x n_m); sample indices refer to the
/// retained-sample list, not the original source.
struct ActivationCloud {
  std::size_t n_m = 0;
  std::vector<float> coords;
  std::vector<std::uint32_t> sample;
  std::vector<std::uint32_t> py, px;
  double fraction = 1.0;

  std::size_t n_points() const { return sample.size(); }
  const float* point(std::size_t i) const { return coords.data() + i * n_m; }
};

/// Holds the full activation maps of retained samples, either in memory or
/// spilled to a cache directory so the resident set stays at one map.
class MapStore {
 public:
  MapStore() = default;
  explicit MapStore(std::string cache_dir) : cache_dir_(std::move(cache_dir)) {
    if (!cache_dir_.empty()) std::filesystem::create_directories(cache_dir_);
  }

  void append(const Tensorf& map) {
    if (n_ == 0)
      shape_ = map.shape();
    else if (map.shape() != shape_)
      throw DataError("activation maps in one store must share a shape");
    if (cache_dir_.empty()) {
      maps_.push_back(map);
    } else {
      io::save_npy(path(n_), map);
    }
    ++n_;
  }

  Tensorf get(std::size_t i) const {
    if (i >= n_) throw DataError("map store index out of range");
    if (cache_dir_.empty()) return maps_[i];
    Tensorf t = io::load_npy<float>(path(i));
    return t;
  }

  std::size_t size() const { return n_; }
  const std::vector<std::size_t>& shape() const { return shape_; }

 private:
  std::string path(std::size_t i) const {
    return (std::filesystem::path(cache_dir_) /
            ("map_" + std::to_string(i) + ".npy"))
        .string();
  }

  std::string cache_dir_;
  std::vector<Tensorf> maps_;
  std::vector<std::size_t> shape_;
  std::size_t n_ = 0;
};

struct CollectedActivations {
  ActivationCloud cloud;
  MapStore maps;                  // one map per retained sample
  std::vector<float> baseline;    // un-occluded score per retained sample
  std::vector<float> label;       // ground-truth label per retained sample
  std::vector<std::string> ids;
  std::size_t n_seen = 0;         // samples examined
};

/// Forward every sample, keep the correctly classified ones, record their
/// maps and baseline scores, and build the point cloud from activations
/// outside the frame, each retained with probability `fraction`.
inline CollectedActivations collect_activations(
    nn::Model& model, const data::SampleSource& src, std::size_t frame,
    double fraction, std::uint64_t seed, std::size_t batch_size = 16,
    const std::string& cache_dir = "") {
  if (fraction < 0.0 || fraction > 1.0)
    throw ConfigError("subsample fraction must lie in [0, 1]");
  CollectedActivations out;
  out.maps = MapStore(cache_dir);
  out.cloud.n_m = model.config.n_m;
  out.cloud.fraction = fraction;
  out.n_seen = src.size();

  std::mt19937_64 rng(derive_seed(seed, 40));
  std::bernoulli_distribution keep(fraction);

  for (std::size_t start = 0; start < src.size(); start += batch_size) {
    const std::size_t nb = std::min(batch_size, src.size() - start);
    Tensorf x;
    std::vector<float> labels(nb);
    std::vector<std::string> ids(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      const data::RasterSample& s = src.get(start + k);
      Tensorf t = train::scale_input(s.pixels);
      if (k == 0) x = Tensorf({nb, t.dim(0), t.dim(1), t.dim(2)});
      std::copy(t.begin(), t.end(), &x(k, 0, 0, 0));
      labels[k] = s.label;
      ids[k] = s.id;
    }
    Tensorf maps = model.encdec.forward(x, false);
    Tensorf scores = model.classifier.forward(maps, false);
    const std::size_t n_m = maps.dim(1), h = maps.dim(2), w = maps.dim(3);
    if (2 * frame >= h || 2 * frame >= w)
      throw ConfigError("frame of " + std::to_string(frame) +
                        " px leaves no interior on " + std::to_string(h) +
                        "x" + std::to_string(w) + " maps");
    for (std::size_t k = 0; k < nb; ++k) {
      const bool correct = (scores[k] >= 0.5f) == (labels[k] >= 0.5f);
      if (!correct) continue;
      const auto sample_idx = std::uint32_t(out.maps.size());
      Tensorf one({n_m, h, w});
      std::copy(&maps(k, 0, 0, 0), &maps(k, 0, 0, 0) + n_m * h * w,
                one.begin());
      out.maps.append(one);
      out.baseline.push_back(scores[k]);
      out.label.push_back(labels[k]);
      out.ids.push_back(ids[k]);
      if (fraction == 0.0) continue;
      for (std::size_t y = frame; y < h - frame; ++y)
        for (std::size_t xx = frame; xx < w - frame; ++xx) {
          if (fraction < 1.0 && !keep(rng)) continue;
          for (std::size_t c = 0; c < n_m; ++c)
            out.cloud.coords.push_back(one(c, y, xx));
          out.cloud.sample.push_back(sample_idx);
          out.cloud.py.push_back(std::uint32_t(y));
          out.cloud.px.push_back(std::uint32_t(xx));
        }
    }
  }
  if (out.maps.size() == 0)
    throw DataError(
        "no correctly classified samples; cannot build an activation space");
  return out;
}

}  // namespace asos::space
