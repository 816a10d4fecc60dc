#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "asos/data/manifest.hpp"
#include "asos/data/sample.hpp"
#include "asos/io/csv.hpp"

namespace asos::data {

// Spatially consistent train/val/test split. Per category: DBSCAN groups
// samples closer than eps, oversized groups are subdivided with k-means,
// and whole clusters are then dealt greedily to the subset with the largest
// remaining deficit. Nearby samples therefore never straddle subsets.

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

enum class DistanceMetric { kAuto, kGeographic, kPlanar };

struct SplitConfig {
  double eps_m = 10000.0;  // cluster separation distance
  std::size_t min_pts = 1; // DBSCAN core threshold; 1 = pure connectivity
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  double large_cluster_frac = 0.05;  // subdivide clusters above this share
  double subdivision_part_frac = 0.025;  // target share per k-means part
  std::size_t min_cluster_size = 5;  // smaller clusters are forced to train
  std::uint64_t seed = 0;
  DistanceMetric metric = DistanceMetric::kAuto;

  void validate() const {
    double sum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("split fractions must sum to 1");
    if (eps_m <= 0.0) throw ConfigError("split eps must be positive");
  }
};

struct SplitAssignment {
  struct Entry {
    std::string id;
    std::string category;
    std::string cluster;
    Subset subset = Subset::kTrain;
  };
  std::vector<Entry> entries;  // input order
  std::vector<std::string> warnings;

  std::map<std::string, Subset> subset_by_id() const {
    std::map<std::string, Subset> m;
    for (const auto& e : entries) m[e.id] = e.subset;
    return m;
  }
};

namespace detail {

constexpr double kEarthRadiusM = 6371000.0;

inline double haversine_m(const Point2& a, const Point2& b) {
  const double d2r = 3.14159265358979323846 / 180.0;
  const double dlat = (b.y - a.y) * d2r;
  const double dlon = (b.x - a.x) * d2r;
  const double s1 = std::sin(dlat / 2), s2 = std::sin(dlon / 2);
  const double h =
      s1 * s1 + std::cos(a.y * d2r) * std::cos(b.y * d2r) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

inline double distance_m(const Point2& a, const Point2& b, bool geographic) {
  if (!geographic) return std::hypot(a.x - b.x, a.y - b.y);
  return haversine_m(a, b);
}

}  // namespace detail

/// Classic DBSCAN over 2-d points. Returns one label per point; with
/// min_pts = 1 every point is core, so labels are the connected components
/// of the eps-graph. Noise points (only possible for min_pts > 1) get
/// singleton labels appended after the regular clusters.
inline std::vector<int> dbscan(const std::vector<Point2>& pts, double eps_m,
                               std::size_t min_pts, bool geographic) {
  const std::size_t n = pts.size();
  std::vector<int> label(n, -2);  // -2 unvisited, -1 noise

  // For geographic coordinates, prefilter with a latitude/longitude box
  // before the exact haversine test.
  const double lat_margin = eps_m / 110540.0 * 1.01;
  auto neighbors = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j) {
      if (geographic) {
        if (std::abs(pts[j].y - pts[i].y) > lat_margin) continue;
      }
      if (detail::distance_m(pts[i], pts[j], geographic) <= eps_m)
        out.push_back(j);
    }
    return out;
  };

  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != -2) continue;
    auto seed_nbrs = neighbors(i);
    if (seed_nbrs.size() < min_pts) {
      label[i] = -1;
      continue;
    }
    const int cid = next++;
    label[i] = cid;
    std::deque<std::size_t> queue(seed_nbrs.begin(), seed_nbrs.end());
    while (!queue.empty()) {
      std::size_t j = queue.front();
      queue.pop_front();
      if (label[j] == -1) label[j] = cid;  // border point
      if (label[j] != -2) continue;
      label[j] = cid;
      auto nbrs = neighbors(j);
      if (nbrs.size() >= min_pts)
        queue.insert(queue.end(), nbrs.begin(), nbrs.end());
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (label[i] == -1) label[i] = next++;
  return label;
}

/// Lloyd's k-means with k-means++ seeding on planar coordinates.
/// Empty clusters are reseeded to the farthest point from its centroid.
inline std::vector<int> kmeans(const std::vector<Point2>& pts, std::size_t k,
                               std::uint64_t seed, std::size_t max_iter = 100) {
  const std::size_t n = pts.size();
  if (k <= 1 || n <= k) {
    std::vector<int> label(n, 0);
    if (n <= k)
      for (std::size_t i = 0; i < n; ++i) label[i] = static_cast<int>(i);
    return label;
  }
  std::mt19937_64 rng(seed);
  std::vector<Point2> centers;
  centers.reserve(k);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.push_back(pts[pick(rng)]);
  std::vector<double> d2(n, std::numeric_limits<double>::max());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = pts[i].x - centers.back().x;
      const double dy = pts[i].y - centers.back().y;
      d2[i] = std::min(d2[i], dx * dx + dy * dy);
      total += d2[i];
    }
    if (total <= 0.0) {
      centers.push_back(pts[pick(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng), acc = 0.0;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= r) {
        chosen = i;
        break;
      }
    }
    centers.push_back(pts[chosen]);
  }

  std::vector<int> label(n, 0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      int arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double dx = pts[i].x - centers[c].x;
        const double dy = pts[i].y - centers[c].y;
        const double d = dx * dx + dy * dy;
        if (d < best) {
          best = d;
          arg = static_cast<int>(c);
        }
      }
      if (arg != label[i]) {
        label[i] = arg;
        changed = true;
      }
    }
    std::vector<Point2> sum(k);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[label[i]].x += pts[i].x;
      sum[label[i]].y += pts[i].y;
      ++cnt[label[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (cnt[c] == 0) {
        // farthest point from its current centroid
        std::size_t far = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dx = pts[i].x - centers[label[i]].x;
          const double dy = pts[i].y - centers[label[i]].y;
          if (dx * dx + dy * dy > best) {
            best = dx * dx + dy * dy;
            far = i;
          }
        }
        centers[c] = pts[far];
        changed = true;
      } else {
        centers[c] = {sum[c].x / cnt[c], sum[c].y / cnt[c]};
      }
    }
    if (!changed) break;
  }
  return label;
}

namespace detail {

// Local tangent-plane projection (meters) for k-means on geographic points.
inline std::vector<Point2> project_local(const std::vector<Point2>& pts) {
  double mean_lat = 0.0;
  for (const auto& p : pts) mean_lat += p.y;
  mean_lat /= pts.empty() ? 1.0 : double(pts.size());
  const double d2r = 3.14159265358979323846 / 180.0;
  const double mx = 111320.0 * std::cos(mean_lat * d2r);
  const double my = 110540.0;
  std::vector<Point2> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    out[i] = {pts[i].x * mx, pts[i].y * my};
  return out;
}

}  // namespace detail

/// Build the spatially consistent split. `entries` may come straight from a
/// manifest; pixel data is not needed.
inline SplitAssignment spatial_split(const std::vector<ManifestEntry>& entries,
                                     const SplitConfig& cfg) {
  cfg.validate();
  if (entries.empty()) throw DataError("spatial split on empty sample set");

  SplitAssignment result;
  result.entries.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    result.entries[i].id = entries[i].id;
    result.entries[i].category = entries[i].category;
  }

  // categories in first-appearance order
  std::vector<std::string> categories;
  for (const auto& e : entries)
    if (std::find(categories.begin(), categories.end(), e.category) ==
        categories.end())
      categories.push_back(e.category);

  for (std::size_t ci = 0; ci < categories.size(); ++ci) {
    const std::string& cat = categories[ci];
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].category == cat) idx.push_back(i);

    const bool geographic =
        cfg.metric == DistanceMetric::kGeographic ||
        (cfg.metric == DistanceMetric::kAuto && !is_planar_category(cat));

    std::vector<Point2> pts(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      pts[i] = {entries[idx[i]].x, entries[idx[i]].y};

    // Stage 1: separation by distance.
    std::vector<int> coarse = dbscan(pts, cfg.eps_m, cfg.min_pts, geographic);

    // Stage 2: subdivide clusters that hold too large a share.
    const std::size_t cat_n = idx.size();
    const std::size_t large_limit = static_cast<std::size_t>(
        std::ceil(cfg.large_cluster_frac * double(cat_n)));
    std::map<int, std::vector<std::size_t>> members;  // coarse id -> local idx
    for (std::size_t i = 0; i < idx.size(); ++i) members[coarse[i]].push_back(i);

    struct Cluster {
      std::string name;
      std::vector<std::size_t> local;  // indices into idx
    };
    std::vector<Cluster> clusters;
    for (auto& [cid, local] : members) {
      if (local.size() > large_limit && local.size() > 1) {
        const std::size_t parts = static_cast<std::size_t>(std::ceil(
            double(local.size()) / (cfg.subdivision_part_frac * double(cat_n))));
        std::vector<Point2> sub(local.size());
        for (std::size_t i = 0; i < local.size(); ++i) sub[i] = pts[local[i]];
        if (geographic) sub = detail::project_local(sub);
        std::vector<int> fine =
            kmeans(sub, parts, derive_seed(cfg.seed, ci * 1009 + cid));
        std::map<int, Cluster> split_parts;
        for (std::size_t i = 0; i < local.size(); ++i)
          split_parts[fine[i]].local.push_back(local[i]);
        for (auto& [fid, cl] : split_parts) {
          cl.name = cat + ":" + std::to_string(cid) + "." + std::to_string(fid);
          clusters.push_back(std::move(cl));
        }
      } else {
        clusters.push_back({cat + ":" + std::to_string(cid), local});
      }
    }

    // Stage 3: greedy assignment against target counts.
    std::array<double, 3> target{};
    for (int s = 0; s < 3; ++s) target[s] = cfg.fractions[s] * double(cat_n);
    std::array<double, 3> assigned{};

    std::vector<std::size_t> order(clusters.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return clusters[a].local.size() > clusters[b].local.size();
    });

    // very small clusters always train
    for (std::size_t oi : order) {
      Cluster& cl = clusters[oi];
      int subset;
      if (cl.local.size() < cfg.min_cluster_size) {
        subset = 0;
      } else {
        subset = 0;
        double best = -std::numeric_limits<double>::max();
        for (int s = 0; s < 3; ++s) {
          const double deficit = target[s] - assigned[s];
          if (deficit > best + 1e-12) {
            best = deficit;
            subset = s;
          }
        }
      }
      assigned[subset] += double(cl.local.size());
      for (std::size_t li : cl.local) {
        auto& e = result.entries[idx[li]];
        e.cluster = cl.name;
        e.subset = static_cast<Subset>(subset);
      }
    }

    if (clusters.size() == 1 && cat_n > 1 && cfg.fractions[0] < 1.0) {
      result.warnings.push_back(
          "category '" + cat +
          "' collapsed into a single spatial cluster; all samples assigned "
          "to train");
    }
  }
  return result;
}

inline void save_split(const std::string& path, const SplitAssignment& split) {
  io::CsvWriter w({"id", "category", "cluster", "subset"});
  for (const auto& e : split.entries)
    w.row(e.id, e.category, e.cluster, to_string(e.subset));
  io::write_file_atomic(path, w.str());
}

inline SplitAssignment load_split(const std::string& path) {
  io::CsvTable t = io::load_csv(path);
  const int c_id = t.require_column("id", path);
  const int c_cat = t.require_column("category", path);
  const int c_cluster = t.require_column("cluster", path);
  const int c_subset = t.require_column("subset", path);
  SplitAssignment s;
  for (const auto& row : t.rows) {
    SplitAssignment::Entry e;
    e.id = row.at(c_id);
    e.category = row.at(c_cat);
    e.cluster = row.at(c_cluster);
    e.subset = subset_from_string(row.at(c_subset));
    s.entries.push_back(std::move(e));
  }
  return s;
}

}  // namespace asos::data
