#pragma once

#include "eelabel/error.hpp"
#include "eelabel/point_cloud.hpp"
#include "eelabel/rng.hpp"
#include "eelabel/spatial_index.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace eelabel {

struct VoxelKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;
  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(k.x));
    h = mix64(h ^ static_cast<std::uint64_t>(k.y));
    h = mix64(h ^ static_cast<std::uint64_t>(k.z));
    return static_cast<std::size_t>(h);
  }
};

inline VoxelKey voxel_key(const Vec3& p, double voxel) {
  return {static_cast<std::int64_t>(std::floor(p.x() / voxel)), static_cast<std::int64_t>(std::floor(p.y() / voxel)),
          static_cast<std::int64_t>(std::floor(p.z() / voxel))};
}

/// One point per occupied voxel at the centroid of its members, colors and
/// normals averaged (normals re-normalized). Output order is the order in
/// which voxels are first hit; sums run in input order, so the result is
/// deterministic.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0) || !std::isfinite(voxel)) throw Error(ErrorKind::kInvalidArgument, "voxel size must be > 0");
  cloud.validate();
  struct Acc {
    Vec3 pos = Vec3::Zero();
    Vec3 col = Vec3::Zero();
    Vec3 nrm = Vec3::Zero();
    std::size_t count = 0;
  };
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slot;
  slot.reserve(cloud.size());
  std::vector<Acc> acc;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(voxel_key(cloud.positions[i], voxel), acc.size());
    if (inserted) acc.emplace_back();
    Acc& a = acc[it->second];
    a.pos += cloud.positions[i];
    if (cloud.has_colors()) a.col += cloud.colors[i];
    if (cloud.has_normals()) a.nrm += cloud.normals[i];
    ++a.count;
  }
  PointCloud out;
  out.positions.reserve(acc.size());
  for (const Acc& a : acc) {
    const double inv = 1.0 / static_cast<double>(a.count);
    out.positions.push_back(a.pos * inv);
    if (cloud.has_colors()) out.colors.push_back(a.col * inv);
    if (cloud.has_normals()) {
      // Opposing normals can cancel out; use +z instead of NaN.
      const double n = a.nrm.norm();
      out.normals.push_back(n > 0.0 ? Vec3(a.nrm / n) : Vec3::UnitZ());
    }
  }
  return out;
}

/// PCA normal of a neighborhood: eigenvector of the smallest covariance
/// eigenvalue.
inline Vec3 pca_normal(const SpatialIndex& index, std::span<const Neighbor> nbrs) {
  Vec3 mean = Vec3::Zero();
  for (const auto& n : nbrs) mean += index.point(n.id);
  mean /= static_cast<double>(nbrs.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& n : nbrs) {
    const Vec3 d = index.point(n.id) - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  return eig.eigenvectors().col(0).normalized();
}

/// Per-point k-NN PCA normals, each flipped to face `viewpoint`.
inline PointCloud estimate_normals(const PointCloud& cloud, std::size_t k, const Vec3& viewpoint) {
  if (k < 3) throw Error(ErrorKind::kInvalidArgument, "k must be >= 3");
  if (cloud.size() < k)
    throw Error(ErrorKind::kInsufficientPoints,
                "cloud has " + std::to_string(cloud.size()) + " points, need k=" + std::to_string(k));
  const SpatialIndex index(cloud.positions);
  PointCloud out = cloud;
  out.normals.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.knn(cloud.positions[i], k);
    Vec3 n = pca_normal(index, nbrs);
    if (n.dot(viewpoint - cloud.positions[i]) < 0.0) n = -n;
    out.normals[i] = n;
  }
  return out;
}

/// Normals oriented away from the cloud centroid. Used for both the model
/// and scene segments so FPFH sees one sign convention on either side.
inline PointCloud estimate_normals_outward(const PointCloud& cloud, std::size_t k) {
  PointCloud out = estimate_normals(cloud, k, cloud.centroid());
  for (auto& n : out.normals) n = -n;
  return out;
}

}  // namespace eelabel
