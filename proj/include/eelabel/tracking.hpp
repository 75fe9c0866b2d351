#pragma once

#include "eelabel/global_registration.hpp"
#include "eelabel/mesh.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

namespace eelabel {

/// Rigid self-maps of the end-effector model; element 0 is the identity.
struct SymmetryGroup {
  std::vector<RigidTransform> elements{RigidTransform::identity()};

  static SymmetryGroup trivial() { return {}; }

  /// Rotations by multiples of 2*pi/order about `axis` through the model
  /// origin. Matrix entries within 1e-15 of 0 or +-1 are snapped so that
  /// e.g. Rz(180) is exactly diag(-1,-1,1).
  static SymmetryGroup cyclic(const Vec3& axis, int order) {
    if (order < 1) throw Error(ErrorKind::kInvalidArgument, "symmetry order must be >= 1");
    if (!(axis.norm() > 0.0) || !axis.allFinite())
      throw Error(ErrorKind::kInvalidArgument, "symmetry axis must be a nonzero vector");
    SymmetryGroup g;
    for (int k = 1; k < order; ++k) {
      RigidTransform r = rotation_about(axis, 2.0 * std::numbers::pi * k / order);
      for (int i = 0; i < 9; ++i) {
        double& x = r.rotation.data()[i];
        for (double snap : {-1.0, 0.0, 1.0})
          if (std::abs(x - snap) < 1e-15) x = snap;
      }
      g.elements.push_back(r);
    }
    return g;
  }

  std::size_t order() const { return elements.size(); }

  /// Smallest rotation angle among the non-identity elements (pi for a
  /// trivial group, meaning no branch ambiguity).
  double min_rotation() const {
    double m = std::numbers::pi;
    for (std::size_t i = 1; i < elements.size(); ++i)
      m = std::min(m, rotation_geodesic(RigidTransform::identity(), elements[i]));
    return m;
  }

  /// Largest symmetric Hausdorff distance between `points` and their image
  /// under any element.
  double max_hausdorff(std::span<const Vec3> points) const {
    if (points.empty()) throw Error(ErrorKind::kInsufficientPoints, "no points to validate symmetry against");
    const SpatialIndex original(points);
    double worst = 0.0;
    std::vector<Vec3> moved(points.size());
    for (const auto& g : elements) {
      for (std::size_t i = 0; i < points.size(); ++i) moved[i] = apply(g, points[i]);
      const SpatialIndex image(moved);
      for (std::size_t i = 0; i < points.size(); ++i) {
        worst = std::max(worst, original.nearest(moved[i]).dist2);
        worst = std::max(worst, image.nearest(points[i]).dist2);
      }
    }
    return std::sqrt(worst);
  }

  /// Checks every element against the mesh vertices (exact geometry; a
  /// random surface sample could not meet a 1e-6 bound).
  void validate(const TriangleMesh& mesh, double tol = 1e-6) const {
    if (elements.empty() || (elements[0].rotation - Mat3::Identity()).norm() != 0.0 ||
        elements[0].translation.norm() != 0.0)
      throw Error(ErrorKind::kInvalidArgument, "symmetry group must start with the identity");
    const double h = max_hausdorff(mesh.vertices);
    if (h > tol)
      throw Error(ErrorKind::kInvalidArgument,
                  "declared symmetry does not map the model onto itself (Hausdorff " + std::to_string(h) + " m)");
  }
};

/// pose * g for the group element g whose result is closest in rotation to
/// `prev`; the first element wins ties.
inline RigidTransform resolve_symmetry(const RigidTransform& pose, const RigidTransform& prev, const SymmetryGroup& g) {
  RigidTransform best = pose;
  double best_angle = std::numeric_limits<double>::infinity();
  for (const auto& e : g.elements) {
    const RigidTransform cand = compose(pose, e);
    const double a = rotation_geodesic(cand, prev);
    if (a < best_angle) {
      best_angle = a;
      best = cand;
    }
  }
  return best;
}

enum class TrackMethod { kGlobal, kSeeded, kReregistered, kMissing };

inline std::string_view to_string(TrackMethod m) {
  switch (m) {
    case TrackMethod::kGlobal: return "global";
    case TrackMethod::kSeeded: return "seeded";
    case TrackMethod::kReregistered: return "re-registered";
    case TrackMethod::kMissing: return "missing";
  }
  return "unknown";
}

struct TrackEntry {
  RigidTransform pose;
  double fitness = 0.0;
  double inlier_rmse = 0.0;
  TrackMethod method = TrackMethod::kGlobal;
  bool converged = false;
  double seconds = 0.0;  // wall time spent on this frame; never serialized

  bool flagged() const { return method == TrackMethod::kMissing || fitness == 0.0; }
};

struct PoseTrack {
  std::vector<TrackEntry> entries;
  std::size_t global_registrations = 0;
};

struct TrackingParams {
  RegistrationConfig registration = RegistrationConfig::for_voxel(0.005);
  double reregister_fitness = 0.3;

  void validate() const {
    registration.validate();
    if (!(reregister_fitness >= 0.0 && reregister_fitness <= 1.0))
      throw Error(ErrorKind::kInvalidArgument, "re-registration threshold must be in [0, 1]");
  }
};

/// Frame-by-frame tracker: global registration on the first frame, ICP
/// seeded with the previous pose afterwards, symmetry branch kept
/// consistent with the previous pose, and global registration again when
/// the seeded fit drops below the quality gate.
class PoseTracker {
 public:
  PoseTracker(const PointCloud& model, SymmetryGroup group, TrackingParams params)
      : model_(model), group_(std::move(group)), params_(std::move(params)) {
    params_.validate();
    if (model_.empty()) throw Error(ErrorKind::kInsufficientPoints, "model cloud is empty");
    model_.normals.clear();
    model_features_ = compute_feature_cloud(model_, params_.registration);
  }

  const PoseTrack& track() const { return track_; }
  PoseTrack release() { return std::move(track_); }

  /// Processes the next segmented scene cloud and returns its entry.
  const TrackEntry& step(const PointCloud& scene_in) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t t = track_.entries.size();
    TrackEntry e;
    if (scene_in.empty()) {
      if (t == 0) throw Error(ErrorKind::kEmptyFrame, "first frame has no end-effector points");
      e.pose = track_.entries.back().pose;
      e.method = TrackMethod::kMissing;
    } else {
      const auto& cfg = params_.registration;
      const PointCloud scene = with_normals_if_possible(scene_in, cfg.normal_k);
      const SpatialIndex index(scene.positions);
      if (t == 0) {
        ++track_.global_registrations;
        assign(e, global_register(model_, model_features_, scene, cfg, nullptr, &index), TrackMethod::kGlobal);
      } else {
        const RigidTransform prev = track_.entries.back().pose;
        assign(e, icp_refine(model_, scene, prev, cfg.icp, &index), TrackMethod::kSeeded);
        if (e.fitness < params_.reregister_fitness) {
          ++track_.global_registrations;
          try {
            const RegistrationResult g = global_register(model_, model_features_, scene, cfg, nullptr, &index);
            if (g.fitness >= e.fitness) assign(e, g, TrackMethod::kReregistered);
            else e.method = TrackMethod::kReregistered;  // attempted; seeded fit kept
          } catch (const Error& err) {
            if (err.kind() != ErrorKind::kInsufficientPoints) throw;
            e.method = TrackMethod::kReregistered;
          }
        }
        e.pose = resolve_symmetry(e.pose, prev, group_);
      }
    }
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    track_.entries.push_back(e);
    return track_.entries.back();
  }

 private:
  static void assign(TrackEntry& e, const RegistrationResult& r, TrackMethod m) {
    e.pose = r.transform;
    e.fitness = r.fitness;
    e.inlier_rmse = r.inlier_rmse;
    e.converged = r.converged;
    e.method = m;
  }

  PointCloud model_;
  FeatureCloud model_features_;
  SymmetryGroup group_;
  TrackingParams params_;
  PoseTrack track_;
};

inline PoseTrack track_sequence(std::span<const PointCloud> frames, const PointCloud& model, const SymmetryGroup& group,
                                const TrackingParams& params) {
  if (frames.empty()) throw Error(ErrorKind::kInsufficientPoints, "no frames to track");
  PoseTracker tracker(model, group, params);
  for (const auto& f : frames) tracker.step(f);
  return tracker.release();
}

}  // namespace eelabel
