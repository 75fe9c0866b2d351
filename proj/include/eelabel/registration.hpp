#pragma once

#include "eelabel/error.hpp"
#include "eelabel/fpfh.hpp"
#include "eelabel/kabsch.hpp"
#include "eelabel/point_cloud.hpp"
#include "eelabel/rng.hpp"
#include "eelabel/spatial_index.hpp"

#include <Eigen/Cholesky>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace eelabel {

/// One accepted ICP update. `rmse_same_set` re-evaluates the previous
/// inlier source points (nearest neighbor, no distance cap) after the
/// update; acceptance requires it not to exceed `rmse_before`.
/// One accepted ICP update. `objective_*` is the RMS of the minimized
/// residual over the inlier set the update was solved on: point-to-plane
/// distance for plane steps, point distance (re-matched) for point steps.
struct IcpStep {
  bool plane = false;
  double objective_before = 0.0;
  double objective_after = 0.0;
  double rmse_after = 0.0;
  double fitness_after = 0.0;
};

/// Pose estimate mapping the source (model) frame into the target (world)
/// frame, with its quality on the source points.
struct RegistrationResult {
  RigidTransform transform;
  double fitness = 0.0;      // fraction of source points with a target match
  double inlier_rmse = 0.0;  // over those matches; 0 when fitness is 0
  int iterations = 0;
  bool converged = false;
  std::vector<IcpStep> trace;  // ICP only, one entry per accepted update
};

struct RansacParams {
  int max_iterations = 100000;
  double confidence = 0.999;
  double inlier_distance = 0.0075;
  int sample_size = 3;
  double edge_similarity = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    if (sample_size < 3) throw Error(ErrorKind::kInvalidArgument, "RANSAC sample size must be >= 3");
    if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorKind::kInvalidArgument, "confidence must be in (0,1)");
    if (!(inlier_distance > 0.0)) throw Error(ErrorKind::kInvalidArgument, "inlier distance must be > 0");
    if (max_iterations < 1) throw Error(ErrorKind::kInvalidArgument, "max iterations must be >= 1");
    if (!(edge_similarity > 0.0 && edge_similarity <= 1.0))
      throw Error(ErrorKind::kInvalidArgument, "edge similarity must be in (0,1]");
  }
};

enum class IcpVariant { kPointToPoint, kPointToPlane };

struct IcpParams {
  double max_correspondence_distance = 0.0125;
  int max_iterations = 50;
  double relative_rmse = 1e-6;
  IcpVariant variant = IcpVariant::kPointToPlane;
  /// A result that stopped cleanly but covers less than this fraction of
  /// the source is still reported as not converged.
  double min_fitness = 0.3;

  void validate() const {
    if (!(max_correspondence_distance > 0.0))
      throw Error(ErrorKind::kInvalidArgument, "max correspondence distance must be > 0");
    if (max_iterations < 0) throw Error(ErrorKind::kInvalidArgument, "max iterations must be >= 0");
    if (!(relative_rmse >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "relative RMSE threshold must be >= 0");
    if (!(min_fitness >= 0.0 && min_fitness <= 1.0))
      throw Error(ErrorKind::kInvalidArgument, "min fitness must be in [0, 1]");
  }
};

struct AlignmentScore {
  double fitness = 0.0;
  double inlier_rmse = 0.0;
  std::size_t inliers = 0;
};

/// Fitness and inlier RMSE of `t` applied to `source` against the indexed
/// target, counting matches within max_distance.
inline AlignmentScore score_alignment(std::span<const Vec3> source, const SpatialIndex& target,
                                      const RigidTransform& t, double max_distance) {
  AlignmentScore s;
  if (source.empty()) return s;
  const double max2 = max_distance * max_distance;
  double sse = 0.0;
  for (const auto& p : source) {
    const Neighbor nn = target.nearest(apply(t, p));
    if (nn.dist2 <= max2) {
      sse += nn.dist2;
      ++s.inliers;
    }
  }
  s.fitness = static_cast<double>(s.inliers) / static_cast<double>(source.size());
  s.inlier_rmse = s.inliers ? std::sqrt(sse / static_cast<double>(s.inliers)) : 0.0;
  return s;
}

/// For each source descriptor, the target point with the nearest descriptor
/// (ties to the lower id). Brute force over the 33-d descriptors.
inline std::vector<std::size_t> match_descriptors(std::span<const FpfhDescriptor> src,
                                                  std::span<const FpfhDescriptor> tgt) {
  std::vector<std::size_t> match(src.size(), 0);
  for (std::size_t i = 0; i < src.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < tgt.size(); ++j) {
      const double d = descriptor_distance2(src[i], tgt[j]);
      if (d < best) {
        best = d;
        match[i] = j;
      }
    }
  }
  return match;
}

/// Number of hypotheses needed to reach `confidence` at inlier ratio w.
inline double ransac_required_iterations(double w, int sample_size, double confidence) {
  const double good = std::pow(w, sample_size);
  if (good >= 1.0) return 0.0;
  if (good <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log(1.0 - confidence) / std::log(1.0 - good);
}

/// Feature-based RANSAC. Each hypothesis draws sample_size distinct source
/// points, pairs them with their nearest-descriptor target points, rejects
/// the draw unless every edge length agrees within the similarity ratio,
/// fits Kabsch and scores fitness over all source points. The best fitness
/// wins (ties to lower RMSE). Stops once the confidence bound is met, where
/// w is the fraction of descriptor correspondences that are inliers under
/// the best hypothesis.
inline RegistrationResult ransac_register(const PointCloud& source, const PointCloud& target,
                                          std::span<const FpfhDescriptor> src_desc,
                                          std::span<const FpfhDescriptor> tgt_desc, const RansacParams& p) {
  p.validate();
  const auto s = static_cast<std::size_t>(p.sample_size);
  if (source.size() < s || target.size() < s)
    throw Error(ErrorKind::kInsufficientPoints, "RANSAC needs at least " + std::to_string(s) + " points per cloud");
  if (src_desc.size() != source.size() || tgt_desc.size() != target.size())
    throw Error(ErrorKind::kDimensionMismatch, "descriptors must align with points");

  const SpatialIndex target_index(target.positions);
  const std::vector<std::size_t> match = match_descriptors(src_desc, tgt_desc);
  const double inlier2 = p.inlier_distance * p.inlier_distance;

  CounterRng rng(p.seed);
  RegistrationResult best;
  double best_w = 0.0;
  double needed = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> sample(s);
  std::vector<Vec3> a(s), b(s);
  int k = 0;
  for (; k < p.max_iterations && static_cast<double>(k) < needed; ++k) {
    for (std::size_t i = 0; i < s; ++i) {
      bool fresh;
      do {
        sample[i] = static_cast<std::size_t>(rng.below(source.size()));
        fresh = true;
        for (std::size_t j = 0; j < i; ++j) fresh = fresh && sample[j] != sample[i];
      } while (!fresh);
      a[i] = source.positions[sample[i]];
      b[i] = target.positions[match[sample[i]]];
    }
    bool consistent = true;
    for (std::size_t i = 0; i < s && consistent; ++i) {
      for (std::size_t j = i + 1; j < s && consistent; ++j) {
        const double ds = (a[i] - a[j]).norm();
        const double dt = (b[i] - b[j]).norm();
        const double hi = std::max(ds, dt);
        consistent = hi > 0.0 && std::min(ds, dt) >= p.edge_similarity * hi;
      }
    }
    if (!consistent) continue;
    RigidTransform t;
    try {
      t = kabsch(a, b);
    } catch (const Error&) {
      continue;
    }
    const AlignmentScore score = score_alignment(source.positions, target_index, t, p.inlier_distance);
    const bool better = score.fitness > best.fitness ||
                        (score.fitness == best.fitness && score.fitness > 0.0 && score.inlier_rmse < best.inlier_rmse);
    if (!better) continue;
    best.transform = t;
    best.fitness = score.fitness;
    best.inlier_rmse = score.inlier_rmse;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < source.size(); ++i)
      if ((apply(t, source.positions[i]) - target.positions[match[i]]).squaredNorm() <= inlier2) ++agree;
    best_w = static_cast<double>(agree) / static_cast<double>(source.size());
    needed = ransac_required_iterations(best_w, p.sample_size, p.confidence);
  }
  best.iterations = k;
  best.converged = best.fitness > 0.0;
  return best;
}

namespace detail {

inline RigidTransform small_motion(const Eigen::Matrix<double, 6, 1>& x) {
  const Vec3 w = x.head<3>();
  const double angle = w.norm();
  RigidTransform d;
  if (angle > 0.0) d.rotation = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
  d.translation = x.tail<3>();
  return d;
}

}  // namespace detail

/// Iterative closest point from `init`. Each iteration matches every
/// transformed source point to its nearest target point within the max
/// distance and solves the closed-form update (Kabsch, or the linearized
/// point-to-plane system). An update that raises its own objective on the
/// current inlier set is rejected: a plane update is then replaced by a
/// point-to-point one, and a rejected point update ends the loop. Stops
/// when the relative change of inlier RMSE drops below the threshold; a final fitness under
/// `min_fitness` clears the converged flag. Point-to-plane falls back to
/// point-to-point when the target has no normals.
inline RegistrationResult icp_refine(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                                     const IcpParams& p, const SpatialIndex* target_index = nullptr) {
  p.validate();
  if (source.empty() || target.empty()) throw Error(ErrorKind::kInsufficientPoints, "ICP needs nonempty clouds");
  const bool plane = p.variant == IcpVariant::kPointToPlane && target.has_normals();
  SpatialIndex local_index;
  if (!target_index) {
    local_index = SpatialIndex(target.positions);
    target_index = &local_index;
  }
  const double max2 = p.max_correspondence_distance * p.max_correspondence_distance;

  std::vector<Vec3> moved(source.size());
  std::vector<std::size_t> src_ids, tgt_ids;
  auto correspond = [&](const RigidTransform& t, AlignmentScore& score) {
    src_ids.clear();
    tgt_ids.clear();
    double sse = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      moved[i] = apply(t, source.positions[i]);
      const Neighbor nn = target_index->nearest(moved[i]);
      if (nn.dist2 <= max2) {
        src_ids.push_back(i);
        tgt_ids.push_back(nn.id);
        sse += nn.dist2;
      }
    }
    score.inliers = src_ids.size();
    score.fitness = static_cast<double>(src_ids.size()) / static_cast<double>(source.size());
    score.inlier_rmse = src_ids.empty() ? 0.0 : std::sqrt(sse / static_cast<double>(src_ids.size()));
  };

  RegistrationResult res;
  res.transform = init;
  AlignmentScore cur;
  correspond(init, cur);
  if (cur.inliers == 0) return res;  // fitness 0, not converged

  std::vector<Vec3> a, b;
  for (int it = 0; it < p.max_iterations; ++it) {
    if (cur.inlier_rmse == 0.0) {
      res.converged = true;
      break;
    }
    auto plane_step = [&](RigidTransform& delta) {
      Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
      Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
      for (std::size_t c = 0; c < src_ids.size(); ++c) {
        const Vec3& s = moved[src_ids[c]];
        const Vec3& q = target.positions[tgt_ids[c]];
        const Vec3& n = target.normals[tgt_ids[c]];
        Eigen::Matrix<double, 6, 1> j;
        j.head<3>() = s.cross(n);
        j.tail<3>() = n;
        const double r = (s - q).dot(n);
        ata += j * j.transpose();
        atb -= j * r;
      }
      const Eigen::Matrix<double, 6, 1> x = ata.ldlt().solve(atb);
      if (!x.allFinite()) return false;
      delta = detail::small_motion(x);
      return true;
    };
    auto point_step = [&](RigidTransform& delta) {
      a.resize(src_ids.size());
      b.resize(src_ids.size());
      for (std::size_t c = 0; c < src_ids.size(); ++c) {
        a[c] = moved[src_ids[c]];
        b[c] = target.positions[tgt_ids[c]];
      }
      try {
        delta = kabsch(a, b);
      } catch (const Error&) {
        return false;
      }
      return true;
    };
    auto same_set_rmse = [&](const RigidTransform& t) {
      double sse = 0.0;
      for (std::size_t i : src_ids) sse += target_index->nearest(apply(t, source.positions[i])).dist2;
      return std::sqrt(sse / static_cast<double>(src_ids.size()));
    };
    auto plane_rmse = [&](const RigidTransform& t) {
      double sse = 0.0;
      for (std::size_t c = 0; c < src_ids.size(); ++c) {
        const std::size_t j = tgt_ids[c];
        const double r = (apply(t, source.positions[src_ids[c]]) - target.positions[j]).dot(target.normals[j]);
        sse += r * r;
      }
      return std::sqrt(sse / static_cast<double>(src_ids.size()));
    };
    // Each step must not raise its own objective on the current inlier
    // set. A plane step that fails (the linearization overshot) falls back
    // to a point step, which cannot fail up to rounding: Kabsch minimizes
    // the paired error and re-matching only lowers it.
    RigidTransform delta;
    RigidTransform next;
    IcpStep step;
    bool accepted = false;
    if (plane && plane_step(delta)) {
      next = compose(delta, res.transform);
      step.plane = true;
      step.objective_before = plane_rmse(res.transform);
      step.objective_after = plane_rmse(next);
      accepted = step.objective_after <= step.objective_before;
    }
    if (!accepted && point_step(delta)) {
      next = compose(delta, res.transform);
      step.plane = false;
      step.objective_before = cur.inlier_rmse;
      step.objective_after = same_set_rmse(next);
      accepted = step.objective_after <= step.objective_before;
    }
    res.iterations = it + 1;
    if (!accepted) {
      res.converged = true;
      break;
    }
    AlignmentScore trial;
    correspond(next, trial);
    if (trial.inliers == 0) break;
    const double rel = std::abs(cur.inlier_rmse - trial.inlier_rmse) / cur.inlier_rmse;
    step.rmse_after = trial.inlier_rmse;
    step.fitness_after = trial.fitness;
    res.trace.push_back(step);
    res.transform = next;
    cur = trial;
    if (rel < p.relative_rmse) {
      res.converged = true;
      break;
    }
  }
  res.fitness = cur.fitness;
  res.inlier_rmse = cur.inlier_rmse;
  if (res.fitness < p.min_fitness) res.converged = false;
  return res;
}

}  // namespace eelabel
