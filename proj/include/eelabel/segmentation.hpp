#pragma once

#include "eelabel/error.hpp"
#include "eelabel/point_cloud.hpp"
#include "eelabel/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace eelabel {

struct Hsv {
  double h = 0.0;  // degrees in [0, 360)
  double s = 0.0;
  double v = 0.0;
};

/// Hexcone RGB -> HSV. Hue is 0 for achromatic input.
inline Hsv rgb_to_hsv(const Vec3& rgb) {
  for (int i = 0; i < 3; ++i)
    if (!(rgb[i] >= 0.0 && rgb[i] <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "rgb component outside [0,1]");
  const double mx = rgb.maxCoeff();
  const double mn = rgb.minCoeff();
  const double delta = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) return out;
  double h = 0.0;
  if (mx == rgb.x()) h = 60.0 * std::fmod((rgb.y() - rgb.z()) / delta, 6.0);
  else if (mx == rgb.y()) h = 60.0 * ((rgb.z() - rgb.x()) / delta + 2.0);
  else h = 60.0 * ((rgb.x() - rgb.y()) / delta + 4.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

/// Accepts hue in [hue_min, hue_max] (wrapping through 0 when hue_min >
/// hue_max), with saturation and value lower bounds.
struct ColorFilter {
  double hue_min = 90.0;
  double hue_max = 150.0;
  double sat_min = 0.5;
  double val_min = 0.2;

  void validate() const {
    if (!(hue_min >= 0.0 && hue_min < 360.0) || !(hue_max >= 0.0 && hue_max < 360.0))
      throw Error(ErrorKind::kInvalidArgument, "hue bounds must be in [0,360)");
    if (!(sat_min >= 0.0 && sat_min <= 1.0) || !(val_min >= 0.0 && val_min <= 1.0))
      throw Error(ErrorKind::kInvalidArgument, "saturation/value minimums must be in [0,1]");
  }

  bool accepts(const Hsv& c) const {
    const bool hue_ok = hue_min <= hue_max ? (c.h >= hue_min && c.h <= hue_max) : (c.h >= hue_min || c.h <= hue_max);
    return hue_ok && c.s >= sat_min && c.v >= val_min;
  }
};

struct ClusterParams {
  double link_radius = 0.01;
  std::size_t min_size = 50;

  void validate() const {
    if (!(link_radius > 0.0)) throw Error(ErrorKind::kInvalidArgument, "link radius must be > 0");
    if (min_size < 1) throw Error(ErrorKind::kInvalidArgument, "min cluster size must be >= 1");
  }
};

/// Ids of points whose color passes the filter, ascending.
inline std::vector<std::size_t> color_mask(const PointCloud& cloud, const ColorFilter& f) {
  if (!cloud.has_colors()) throw Error(ErrorKind::kMissingAttribute, "color filtering needs a colored cloud");
  cloud.validate();
  f.validate();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    // Noisy inputs can leave [0,1] slightly; clamp rather than reject.
    const Vec3 c = cloud.colors[i].cwiseMax(0.0).cwiseMin(1.0);
    if (f.accepts(rgb_to_hsv(c))) keep.push_back(i);
  }
  return keep;
}

inline PointCloud filter_by_color(const PointCloud& cloud, const ColorFilter& f) {
  if (cloud.empty() && !cloud.has_colors()) return {};
  return select(cloud, color_mask(cloud, f));
}

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned char> rank_;
};

}  // namespace detail

/// Connected components of the graph linking points within link_radius.
/// Components below min_size are dropped. Each cluster lists ids
/// ascending; clusters are ordered by size descending, then smallest id.
inline std::vector<std::vector<std::size_t>> euclidean_clusters(const PointCloud& cloud, const ClusterParams& p) {
  p.validate();
  if (cloud.empty()) return {};
  const SpatialIndex index(cloud.positions);
  detail::UnionFind uf(cloud.size());
  std::vector<Neighbor> nbrs;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    index.radius_into(cloud.positions[i], p.link_radius, nbrs);
    for (const auto& n : nbrs)
      if (n.id > i) uf.unite(i, n.id);
  }
  std::vector<std::size_t> root_slot(cloud.size(), static_cast<std::size_t>(-1));
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::size_t r = uf.find(i);
    if (root_slot[r] == static_cast<std::size_t>(-1)) {
      root_slot[r] = groups.size();
      groups.emplace_back();
    }
    groups[root_slot[r]].push_back(i);
  }
  std::erase_if(groups, [&](const auto& g) { return g.size() < p.min_size; });
  // Groups were created in order of their smallest member, so a stable sort
  // by size gives the tie-break for free.
  std::stable_sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return groups;
}

/// Color filter followed by the largest surviving cluster; empty when
/// nothing survives.
inline PointCloud extract_end_effector(const PointCloud& cloud, const ColorFilter& f, const ClusterParams& p,
                                       std::vector<std::size_t>* source_ids = nullptr) {
  if (!cloud.has_colors() && !cloud.empty())
    throw Error(ErrorKind::kMissingAttribute, "end-effector extraction needs a colored cloud");
  if (source_ids) source_ids->clear();
  if (cloud.empty()) return {};
  const auto keep = color_mask(cloud, f);
  const PointCloud colored = select(cloud, keep);
  const auto clusters = euclidean_clusters(colored, p);
  if (clusters.empty()) return {};
  std::vector<std::size_t> ids;
  ids.reserve(clusters.front().size());
  for (std::size_t i : clusters.front()) ids.push_back(keep[i]);
  if (source_ids) *source_ids = ids;
  return select(cloud, ids);
}

}  // namespace eelabel
