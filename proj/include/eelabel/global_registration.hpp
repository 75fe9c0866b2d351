#pragma once

#include "eelabel/cloud_ops.hpp"
#include "eelabel/fpfh.hpp"
#include "eelabel/registration.hpp"

#include <vector>

namespace eelabel {

/// Registration parameters, most of them scaled from one working voxel.
struct RegistrationConfig {
  double voxel = 0.005;
  std::size_t normal_k = 30;
  double fpfh_radius = 0.025;
  RansacParams ransac;
  IcpParams icp;

  /// Defaults for a working voxel: FPFH radius 5x, RANSAC inlier distance
  /// 1.5x, ICP max correspondence distance 2.5x.
  static RegistrationConfig for_voxel(double voxel) {
    RegistrationConfig c;
    c.voxel = voxel;
    c.fpfh_radius = 5.0 * voxel;
    c.ransac.inlier_distance = 1.5 * voxel;
    c.icp.max_correspondence_distance = 2.5 * voxel;
    return c;
  }

  void validate() const {
    if (!(voxel > 0.0)) throw Error(ErrorKind::kInvalidArgument, "voxel must be > 0");
    if (normal_k < 3) throw Error(ErrorKind::kInvalidArgument, "normal_k must be >= 3");
    if (!(fpfh_radius > 0.0)) throw Error(ErrorKind::kInvalidArgument, "fpfh_radius must be > 0");
    ransac.validate();
    icp.validate();
  }
};

/// A cloud with what global registration needs: the voxel-downsampled copy
/// with outward normals and its FPFH descriptors.
struct FeatureCloud {
  PointCloud downsampled;
  std::vector<FpfhDescriptor> features;
};

inline FeatureCloud compute_feature_cloud(const PointCloud& cloud, const RegistrationConfig& cfg) {
  FeatureCloud out;
  PointCloud down = voxel_downsample(cloud, cfg.voxel);
  down.normals.clear();
  if (down.size() < cfg.normal_k)
    throw Error(ErrorKind::kInsufficientPoints, "only " + std::to_string(down.size()) +
                                                    " points after downsampling, need " + std::to_string(cfg.normal_k));
  out.downsampled = estimate_normals_outward(down, cfg.normal_k);
  out.features = compute_fpfh(out.downsampled, cfg.fpfh_radius);
  return out;
}

/// Adds outward normals when there are enough points for the k-NN fit;
/// otherwise returns the cloud unchanged (ICP then runs point-to-point).
inline PointCloud with_normals_if_possible(const PointCloud& cloud, std::size_t k) {
  if (cloud.size() < k) {
    PointCloud out = cloud;
    out.normals.clear();
    return out;
  }
  return estimate_normals_outward(cloud, k);
}

/// FPFH + RANSAC on the downsampled clouds, then ICP of the full model
/// against `scene`. `scene` should already carry normals for
/// point-to-plane refinement. `coarse` receives the RANSAC result.
inline RegistrationResult global_register(const PointCloud& model, const FeatureCloud& model_features,
                                          const PointCloud& scene, const RegistrationConfig& cfg,
                                          RegistrationResult* coarse = nullptr, const SpatialIndex* scene_index = nullptr) {
  cfg.validate();
  const FeatureCloud scene_features = compute_feature_cloud(scene, cfg);
  RegistrationResult ransac = ransac_register(model_features.downsampled, scene_features.downsampled,
                                              model_features.features, scene_features.features, cfg.ransac);
  RegistrationResult refined = icp_refine(model, scene, ransac.transform, cfg.icp, scene_index);
  if (coarse) *coarse = std::move(ransac);
  return refined;
}

}  // namespace eelabel
