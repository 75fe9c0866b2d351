#pragma once

#include "eelabel/cloud_ops.hpp"
#include "eelabel/demonstration.hpp"
#include "eelabel/segmentation.hpp"
#include "eelabel/tracking.hpp"

#include <string>
#include <utility>
#include <vector>

namespace eelabel {

struct LabelingParams {
  double voxel = 0.005;
  ColorFilter color;
  ClusterParams cluster;
  TrackingParams tracking;
  SymmetryGroup symmetry;

  void validate() const {
    if (!(voxel > 0.0)) throw Error(ErrorKind::kInvalidArgument, "voxel must be > 0");
    color.validate();
    cluster.validate();
    tracking.validate();
  }
};

/// Every view backprojected into the world frame and concatenated.
inline PointCloud merge_views(const Demonstration& demo, const Frame& frame,
                              std::vector<std::pair<std::size_t, std::size_t>>* pixel_of = nullptr) {
  std::vector<PointCloud> views;
  if (pixel_of) pixel_of->clear();
  std::vector<std::size_t> ids;
  for (std::size_t c = 0; c < demo.cameras.size(); ++c) {
    views.push_back(backproject_frame(demo.cameras[c], frame.views[c], 1, pixel_of ? &ids : nullptr));
    if (pixel_of)
      for (std::size_t i : ids) pixel_of->emplace_back(c, i);
  }
  return merge(views);
}

/// Segmented end-effector cloud of one frame: merge all views, voxel
/// downsample, keep the largest cluster of gripper-colored points.
inline PointCloud segment_frame(const Demonstration& demo, const Frame& frame, const LabelingParams& p) {
  const PointCloud merged = merge_views(demo, frame);
  if (merged.empty()) return {};
  return extract_end_effector(voxel_downsample(merged, p.voxel), p.color, p.cluster);
}

/// (pose, action) pairs: the action at step t is the pose at t + 1.
inline std::vector<std::pair<RigidTransform, RigidTransform>> shift_actions(const PoseTrack& track) {
  if (track.entries.size() < 2)
    throw Error(ErrorKind::kTooShortTrack,
                "need at least 2 frames to form an action, got " + std::to_string(track.entries.size()));
  std::vector<std::pair<RigidTransform, RigidTransform>> out;
  out.reserve(track.entries.size() - 1);
  for (std::size_t t = 0; t + 1 < track.entries.size(); ++t)
    out.emplace_back(track.entries[t].pose, track.entries[t + 1].pose);
  return out;
}

struct LabeledStep {
  std::size_t t = 0;
  RigidTransform pose;
  RigidTransform action;
  double fitness = 0.0;
  std::vector<std::string> flags;

  /// Steps whose pose or goal was not observed are left out of training
  /// exports by default.
  bool excluded_by_default() const {
    for (const auto& f : flags)
      if (f == "pose_missing" || f == "action_missing") return true;
    return false;
  }
};

struct LabeledDemonstration {
  std::string id;
  PoseTrack track;
  std::vector<LabeledStep> steps;
};

inline std::vector<std::string> step_flags(const TrackEntry& now, const TrackEntry& next) {
  std::vector<std::string> flags;
  if (now.method == TrackMethod::kMissing) flags.emplace_back("pose_missing");
  if (next.method == TrackMethod::kMissing) flags.emplace_back("action_missing");
  if (now.method == TrackMethod::kReregistered) flags.emplace_back("reregistered");
  if (now.method != TrackMethod::kMissing && !now.converged) flags.emplace_back("unconverged");
  return flags;
}

inline std::vector<LabeledStep> label_track(const PoseTrack& track) {
  const auto pairs = shift_actions(track);
  std::vector<LabeledStep> steps;
  steps.reserve(pairs.size());
  for (std::size_t t = 0; t < pairs.size(); ++t)
    steps.push_back({t, pairs[t].first, pairs[t].second, track.entries[t].fitness,
                     step_flags(track.entries[t], track.entries[t + 1])});
  return steps;
}

/// Full pipeline for one demonstration. Frames are loaded one at a time.
/// A frame-0 segmentation failure propagates as kEmptyFrame.
inline LabeledDemonstration label_demonstration(const Demonstration& demo, const PointCloud& model,
                                                const LabelingParams& p) {
  p.validate();
  demo.validate();
  if (demo.frame_count < 2)
    throw Error(ErrorKind::kTooShortTrack, "demonstration '" + demo.id + "' has " + std::to_string(demo.frame_count) +
                                               " frame(s); at least 2 are needed");
  PoseTracker tracker(model, p.symmetry, p.tracking);
  for (std::size_t t = 0; t < demo.frame_count; ++t) tracker.step(segment_frame(demo, demo.frame(t), p));
  LabeledDemonstration out;
  out.id = demo.id;
  out.track = tracker.release();
  out.steps = label_track(out.track);
  return out;
}

}  // namespace eelabel
