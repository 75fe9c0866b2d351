#pragma once

#include "eelabel/error.hpp"
#include "eelabel/transform.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace eelabel {

/// Positions with optional per-point colors (RGB in [0,1]) and unit normals.
/// An attribute is present iff its array is non-empty.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;
  std::vector<Vec3> normals;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_colors() const { return !colors.empty(); }
  bool has_normals() const { return !normals.empty(); }

  /// Throws kAttributeMismatch if an attribute array has the wrong length.
  void validate() const {
    if (has_colors() && colors.size() != size())
      throw Error(ErrorKind::kAttributeMismatch, "colors length differs from positions");
    if (has_normals() && normals.size() != size())
      throw Error(ErrorKind::kAttributeMismatch, "normals length differs from positions");
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : positions) c += p;
    return empty() ? c : Vec3(c / static_cast<double>(size()));
  }
};

/// Keeps the listed points (in the given order) with all attributes.
inline PointCloud select(const PointCloud& cloud, std::span<const std::size_t> ids) {
  PointCloud out;
  out.positions.reserve(ids.size());
  for (std::size_t i : ids) out.positions.push_back(cloud.positions[i]);
  if (cloud.has_colors()) {
    out.colors.reserve(ids.size());
    for (std::size_t i : ids) out.colors.push_back(cloud.colors[i]);
  }
  if (cloud.has_normals()) {
    out.normals.reserve(ids.size());
    for (std::size_t i : ids) out.normals.push_back(cloud.normals[i]);
  }
  return out;
}

/// Rigidly moves positions and rotates normals.
inline PointCloud transformed(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out = cloud;
  for (auto& p : out.positions) p = apply(t, p);
  for (auto& n : out.normals) n = t.rotation * n;
  return out;
}

/// Concatenation in argument order. All clouds must agree on which
/// attributes are present; empty clouds are compatible with anything.
inline PointCloud merge(std::span<const PointCloud> clouds) {
  PointCloud out;
  int colors = -1;
  int normals = -1;
  std::size_t total = 0;
  for (const auto& c : clouds) {
    c.validate();
    total += c.size();
    if (c.empty()) continue;
    const int hc = c.has_colors() ? 1 : 0;
    const int hn = c.has_normals() ? 1 : 0;
    if ((colors >= 0 && colors != hc) || (normals >= 0 && normals != hn))
      throw Error(ErrorKind::kAttributeMismatch, "clouds disagree on color/normal presence");
    colors = hc;
    normals = hn;
  }
  out.positions.reserve(total);
  for (const auto& c : clouds) {
    out.positions.insert(out.positions.end(), c.positions.begin(), c.positions.end());
    out.colors.insert(out.colors.end(), c.colors.begin(), c.colors.end());
    out.normals.insert(out.normals.end(), c.normals.begin(), c.normals.end());
  }
  return out;
}

inline PointCloud merge(std::initializer_list<PointCloud> clouds) {
  return merge(std::span<const PointCloud>(clouds.begin(), clouds.size()));
}

}  // namespace eelabel
