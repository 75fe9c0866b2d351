#pragma once

#include "eelabel/error.hpp"
#include "eelabel/point_cloud.hpp"
#include "eelabel/transform.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace eelabel {

/// Pinhole camera. `extrinsic` maps camera-frame points (x right, y down,
/// z forward) into the world frame.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  RigidTransform extrinsic;
  int width = 1;
  int height = 1;
  /// Meters per stored unit for 16-bit depth PNGs.
  double depth_scale = 1e-4;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorKind::kInvalidArgument, "focal lengths must be > 0");
    if (width <= 0 || height <= 0) throw Error(ErrorKind::kInvalidArgument, "image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw Error(ErrorKind::kInvalidArgument, "principal point outside the image");
    if (!extrinsic.is_valid()) throw Error(ErrorKind::kInvalidArgument, "extrinsic is not a rigid transform");
    if (!(depth_scale > 0.0)) throw Error(ErrorKind::kInvalidArgument, "depth_scale must be > 0");
  }
};

/// Camera placed at `eye` looking at `target`; `up` picks the roll.
inline RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-12) x = z.unitOrthogonal();
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return {r, eye};
}

/// One RGB-D view. Depth in meters; a pixel is missing when its depth is
/// non-finite or <= 0. Row-major, index = v * width + u.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<Vec3> color;

  DepthImage() = default;
  DepthImage(int w, int h)
      : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0),
        color(static_cast<std::size_t>(w) * h, Vec3::Zero()) {}

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  static bool valid_depth(double d) { return std::isfinite(d) && d > 0.0; }
};

inline Vec3 backproject_pixel(const CameraModel& cam, double u, double v, double d) {
  if (!DepthImage::valid_depth(d)) throw Error(ErrorKind::kInvalidDepth, "depth must be finite and > 0");
  const Vec3 local(d * (u - cam.cx) / cam.fx, d * (v - cam.cy) / cam.fy, d);
  return apply(cam.extrinsic, local);
}

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Inverse of backproject_pixel. depth <= 0 means the point is behind the camera.
inline PixelProjection project_point(const CameraModel& cam, const Vec3& world) {
  const Vec3 local = cam.extrinsic.rotation.transpose() * (world - cam.extrinsic.translation);
  if (local.z() <= 0.0) return {0.0, 0.0, local.z()};
  return {cam.fx * local.x() / local.z() + cam.cx, cam.fy * local.y() / local.z() + cam.cy, local.z()};
}

/// Backprojects every `stride`-th pixel in each axis that has valid depth.
/// When `pixel_ids` is given it receives the source pixel index of each
/// output point.
inline PointCloud backproject_frame(const CameraModel& cam, const DepthImage& img, int stride = 1,
                                    std::vector<std::size_t>* pixel_ids = nullptr) {
  if (img.width != cam.width || img.height != cam.height)
    throw Error(ErrorKind::kDimensionMismatch,
                "image " + std::to_string(img.width) + "x" + std::to_string(img.height) + " vs camera " +
                    std::to_string(cam.width) + "x" + std::to_string(cam.height));
  if (img.depth.size() != img.index(0, img.height) || img.color.size() != img.depth.size())
    throw Error(ErrorKind::kDimensionMismatch, "image buffers do not match declared size");
  if (stride < 1) throw Error(ErrorKind::kInvalidArgument, "stride must be >= 1");
  PointCloud cloud;
  if (pixel_ids) pixel_ids->clear();
  for (int v = 0; v < img.height; v += stride) {
    for (int u = 0; u < img.width; u += stride) {
      const std::size_t i = img.index(u, v);
      const double d = img.depth[i];
      if (!DepthImage::valid_depth(d)) continue;
      cloud.positions.push_back(backproject_pixel(cam, u, v, d));
      cloud.colors.push_back(img.color[i]);
      if (pixel_ids) pixel_ids->push_back(i);
    }
  }
  return cloud;
}

}  // namespace eelabel
