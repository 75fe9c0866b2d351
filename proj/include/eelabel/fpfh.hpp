#pragma once

#include "eelabel/error.hpp"
#include "eelabel/point_cloud.hpp"
#include "eelabel/spatial_index.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace eelabel {

inline constexpr int kFpfhBinsPerFeature = 11;
inline constexpr int kFpfhSize = 3 * kFpfhBinsPerFeature;

/// Three 11-bin histograms (alpha, phi, theta) side by side; each block sums
/// to 100, or the whole descriptor is zero for a point without neighbors.
using FpfhDescriptor = std::array<double, kFpfhSize>;

/// Darboux-frame pair features (theta, alpha, phi) for the pair (p1, n1),
/// (p2, n2). The point whose normal makes the smaller angle with the
/// connecting line is used as the frame origin. Returns zeros for
/// coincident points or a degenerate frame.
inline std::array<double, 3> pair_features(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
  Vec3 dp = p2 - p1;
  const double dist = dp.norm();
  if (dist == 0.0) return {0.0, 0.0, 0.0};
  const double a1 = n1.dot(dp) / dist;
  const double a2 = n2.dot(dp) / dist;
  Vec3 src_n = n1;
  Vec3 tgt_n = n2;
  double phi = a1;
  if (std::acos(std::abs(a1)) > std::acos(std::abs(a2))) {
    src_n = n2;
    tgt_n = n1;
    dp = -dp;
    phi = -a2;
  }
  Vec3 v = dp.cross(src_n);
  const double vn = v.norm();
  if (vn == 0.0) return {0.0, 0.0, 0.0};
  v /= vn;
  const Vec3 w = src_n.cross(v);
  const double alpha = v.dot(tgt_n);
  const double theta = std::atan2(w.dot(tgt_n), src_n.dot(tgt_n));
  return {theta, alpha, phi};
}

inline int fpfh_bin(double x, double lo, double hi) {
  int b = static_cast<int>(std::floor(kFpfhBinsPerFeature * (x - lo) / (hi - lo)));
  return std::clamp(b, 0, kFpfhBinsPerFeature - 1);
}

/// Simplified point feature histogram of every point against its radius
/// neighbors (self excluded); each neighbor contributes 100/m to each block.
inline std::vector<FpfhDescriptor> compute_spfh(const PointCloud& cloud, const SpatialIndex& index, double radius,
                                                std::vector<std::vector<Neighbor>>& neighborhoods) {
  std::vector<FpfhDescriptor> spfh(cloud.size());
  neighborhoods.assign(cloud.size(), {});
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto& nbrs = neighborhoods[i];
    index.radius_into(cloud.positions[i], radius, nbrs);
    std::erase_if(nbrs, [i](const Neighbor& n) { return n.id == i; });
    FpfhDescriptor& h = spfh[i];
    h.fill(0.0);
    if (nbrs.empty()) continue;
    const double incr = 100.0 / static_cast<double>(nbrs.size());
    for (const auto& n : nbrs) {
      const auto f = pair_features(cloud.positions[i], cloud.normals[i], cloud.positions[n.id], cloud.normals[n.id]);
      h[static_cast<std::size_t>(fpfh_bin(f[0], -std::numbers::pi, std::numbers::pi))] += incr;
      h[static_cast<std::size_t>(kFpfhBinsPerFeature + fpfh_bin(f[1], -1.0, 1.0))] += incr;
      h[static_cast<std::size_t>(2 * kFpfhBinsPerFeature + fpfh_bin(f[2], -1.0, 1.0))] += incr;
    }
  }
  return spfh;
}

/// FPFH_i = SPFH_i + (1/m) * sum_j SPFH_j / |p_i - p_j| over the m radius
/// neighbors, then each block rescaled to sum 100.
inline std::vector<FpfhDescriptor> compute_fpfh(const PointCloud& cloud, double radius) {
  if (!cloud.has_normals()) throw Error(ErrorKind::kMissingAttribute, "FPFH needs normals");
  if (!(radius > 0.0)) throw Error(ErrorKind::kInvalidArgument, "FPFH radius must be > 0");
  cloud.validate();
  if (cloud.empty()) return {};
  const SpatialIndex index(cloud.positions);
  std::vector<std::vector<Neighbor>> neighborhoods;
  const auto spfh = compute_spfh(cloud, index, radius, neighborhoods);
  std::vector<FpfhDescriptor> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    FpfhDescriptor& d = out[i];
    d = spfh[i];
    const auto& nbrs = neighborhoods[i];
    if (nbrs.empty()) continue;
    const double inv_m = 1.0 / static_cast<double>(nbrs.size());
    for (const auto& n : nbrs) {
      if (n.dist2 == 0.0) continue;
      const double w = inv_m / std::sqrt(n.dist2);
      for (int b = 0; b < kFpfhSize; ++b) d[static_cast<std::size_t>(b)] += w * spfh[n.id][static_cast<std::size_t>(b)];
    }
    for (int block = 0; block < 3; ++block) {
      double sum = 0.0;
      for (int b = 0; b < kFpfhBinsPerFeature; ++b) sum += d[static_cast<std::size_t>(block * kFpfhBinsPerFeature + b)];
      if (sum <= 0.0) continue;
      for (int b = 0; b < kFpfhBinsPerFeature; ++b) d[static_cast<std::size_t>(block * kFpfhBinsPerFeature + b)] *= 100.0 / sum;
    }
  }
  return out;
}

inline double descriptor_distance2(const FpfhDescriptor& a, const FpfhDescriptor& b) {
  double s = 0.0;
  for (int i = 0; i < kFpfhSize; ++i) {
    const double d = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
    s += d * d;
  }
  return s;
}

}  // namespace eelabel
