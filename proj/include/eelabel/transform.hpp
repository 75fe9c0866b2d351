#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eelabel {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Projects an arbitrary 3x3 matrix onto SO(3) (closest rotation in the
/// Frobenius sense).
inline Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// SE(3) element stored as rotation matrix + translation. Acts on points as
/// x -> rotation * x + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  static RigidTransform from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }

  /// The quaternion is normalized before conversion.
  static RigidTransform from_quaternion(double w, double x, double y, double z, const Vec3& t) {
    Eigen::Quaterniond q(w, x, y, z);
    q.normalize();
    return {q.toRotationMatrix(), t};
  }

  /// Unit quaternion with non-negative w (canonical sign).
  Eigen::Quaterniond quaternion() const {
    Eigen::Quaterniond q(rotation);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    return q;
  }

  double orthonormality_error() const {
    return (rotation.transpose() * rotation - Mat3::Identity()).norm();
  }

  bool is_valid(double tol = 1e-9) const {
    return rotation.allFinite() && translation.allFinite() && orthonormality_error() < tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

inline RigidTransform rotation_about(const Vec3& axis, double angle_rad) {
  return RigidTransform::from_rotation(Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix());
}

inline RigidTransform rot_z(double angle_rad) { return rotation_about(Vec3::UnitZ(), angle_rad); }

inline Vec3 apply(const RigidTransform& t, const Vec3& p) { return t.rotation * p + t.translation; }

/// Result applies b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out{a.rotation * b.rotation, a.rotation * b.translation + a.translation};
  if (out.orthonormality_error() > 1e-12) out.rotation = nearest_rotation(out.rotation);
  return out;
}

inline RigidTransform invert(const RigidTransform& t) {
  const Mat3 rt = t.rotation.transpose();
  return {rt, -(rt * t.translation)};
}

/// Angle of the relative rotation between a and b, in [0, pi]. Equal to
/// arccos((tr(Ra^T Rb) - 1) / 2), evaluated through atan2 so that tiny angles
/// keep full precision instead of collapsing to sqrt(eps).
inline double rotation_geodesic(const RigidTransform& a, const RigidTransform& b) {
  const Mat3 r = a.rotation.transpose() * b.rotation;
  const double c = (r.trace() - 1.0) / 2.0;
  const Vec3 axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = axis.norm() / 2.0;
  return std::clamp(std::atan2(s, c), 0.0, std::numbers::pi);
}

}  // namespace eelabel
