#pragma once

#include "eelabel/camera.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace eelabel {

/// One time step: one image per camera, in camera order.
struct Frame {
  std::vector<DepthImage> views;
};

/// A recorded demonstration. Frames are produced on demand so that long
/// sequences never have to be resident at once.
struct Demonstration {
  std::string id;
  std::filesystem::path source_path;
  std::vector<CameraModel> cameras;
  std::size_t frame_count = 0;
  std::function<Frame(std::size_t)> load_frame;

  void validate() const {
    if (cameras.empty()) throw Error(ErrorKind::kInvalidArgument, "demonstration '" + id + "' has no cameras");
    for (const auto& c : cameras) c.validate();
    if (frame_count > 0 && !load_frame)
      throw Error(ErrorKind::kInvalidArgument, "demonstration '" + id + "' has frames but no loader");
  }

  /// Loads frame `t` and checks that it has one correctly sized view per camera.
  Frame frame(std::size_t t) const {
    if (t >= frame_count)
      throw Error(ErrorKind::kIndexOutOfRange,
                  "frame " + std::to_string(t) + " of " + std::to_string(frame_count) + " in '" + id + "'");
    Frame f = load_frame(t);
    if (f.views.size() != cameras.size())
      throw Error(ErrorKind::kDimensionMismatch, "frame " + std::to_string(t) + " of '" + id + "' has " +
                                                     std::to_string(f.views.size()) + " views, expected " +
                                                     std::to_string(cameras.size()));
    for (std::size_t c = 0; c < cameras.size(); ++c) {
      const auto& img = f.views[c];
      if (img.width != cameras[c].width || img.height != cameras[c].height ||
          img.depth.size() != static_cast<std::size_t>(img.width) * img.height ||
          img.color.size() != img.depth.size())
        throw Error(ErrorKind::kDimensionMismatch,
                    "frame " + std::to_string(t) + " view " + std::to_string(c) + " of '" + id + "' does not match its camera");
    }
    return f;
  }
};

}  // namespace eelabel
