#pragma once

#include "eelabel/error.hpp"
#include "eelabel/transform.hpp"

#include <Eigen/SVD>

#include <span>

namespace eelabel {

/// Least-squares rigid transform (no scale) taking src[i] onto dst[i].
/// Throws kDegenerateConfiguration when the centered cross-covariance has
/// rank < 2 (coincident or collinear points).
inline RigidTransform kabsch(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) throw Error(ErrorKind::kDimensionMismatch, "kabsch needs paired point sets");
  if (src.size() < 3) throw Error(ErrorKind::kDegenerateConfiguration, "kabsch needs at least 3 pairs");
  const double n = static_cast<double>(src.size());
  Vec3 cs = Vec3::Zero();
  Vec3 cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= n;
  cd /= n;
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0])
    throw Error(ErrorKind::kDegenerateConfiguration, "cross-covariance has rank < 2");
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = v * d * u.transpose();
  return {r, cd - r * cs};
}

/// Sum of squared residuals of t over the pairs.
inline double alignment_sse(const RigidTransform& t, std::span<const Vec3> src, std::span<const Vec3> dst) {
  double s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) s += (apply(t, src[i]) - dst[i]).squaredNorm();
  return s;
}

}  // namespace eelabel
