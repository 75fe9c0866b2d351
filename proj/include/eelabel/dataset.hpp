#pragma once

#include "eelabel/demonstration.hpp"
#include "eelabel/image_io.hpp"
#include "eelabel/labeling.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

// On-disk layout of a dataset:
//   <dataset>/<demo_id>/cameras.json
//   <dataset>/<demo_id>/frame_<t>/view_<c>.depth.png   (or view_<c>.depth.bin)
//   <dataset>/<demo_id>/frame_<t>/view_<c>.color.png
// Label outputs per demo: poses.jsonl, labels.jsonl, actions.jsonl, manifest.json.

namespace eelabel {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------- hashing

/// 64-bit FNV-1a, printed as 16 hex digits; used for provenance only.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "writing " + path.string());
}

inline nlohmann::json read_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

/// Parses one JSON value per nonempty line; `where` prefixes error messages.
inline std::vector<nlohmann::json> read_jsonl_string(const std::string& text, const std::string& where = "<jsonl>") {
  std::istringstream in(text);
  std::vector<nlohmann::json> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kParse, where + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  return read_jsonl_string(read_file(path), path.string());
}

// ---------------------------------------------------------------- poses

/// Unit quaternion (w, x, y, z) with w >= 0 so each rotation has one
/// serialized form.
inline Eigen::Quaterniond canonical_quaternion(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0.0 || (q.w() == 0.0 && (q.x() < 0.0 || (q.x() == 0.0 && (q.y() < 0.0 || (q.y() == 0.0 && q.z() < 0.0)))))) {
    q.coeffs() = -q.coeffs();
  }
  return q;
}

inline ojson quaternion_json(const Mat3& r) {
  const auto q = canonical_quaternion(r);
  return ojson::array({q.w(), q.x(), q.y(), q.z()});
}

inline ojson vec_json(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

/// {"q": [w, x, y, z], "t": [x, y, z]}
inline ojson pose_json(const RigidTransform& p) {
  ojson j;
  j["q"] = quaternion_json(p.rotation);
  j["t"] = vec_json(p.translation);
  return j;
}

template <class J>
Vec3 vec_from_json(const J& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::kParse, what + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::kParse, what + ": expected numbers");
    v[i] = j[i].template get<double>();
  }
  return v;
}

inline Mat3 rotation_from_quaternion(double w, double x, double y, double z, const std::string& what) {
  Eigen::Quaterniond q(w, x, y, z);
  const double n = q.norm();
  if (!(n > 1e-9) || !std::isfinite(n)) throw Error(ErrorKind::kParse, what + ": quaternion has zero norm");
  q.coeffs() /= n;
  return q.toRotationMatrix();
}

template <class J>
RigidTransform pose_from_json(const J& j, const std::string& what) {
  if (!j.is_object() || !j.contains("q") || !j.contains("t"))
    throw Error(ErrorKind::kParse, what + ": expected {\"q\": [w,x,y,z], \"t\": [x,y,z]}");
  const auto& q = j["q"];
  if (!q.is_array() || q.size() != 4) throw Error(ErrorKind::kParse, what + ".q: expected 4 numbers");
  for (const auto& c : q)
    if (!c.is_number()) throw Error(ErrorKind::kParse, what + ".q: expected numbers");
  RigidTransform p;
  p.rotation = rotation_from_quaternion(q[0].template get<double>(), q[1].template get<double>(),
                                        q[2].template get<double>(), q[3].template get<double>(), what + ".q");
  p.translation = vec_from_json(j["t"], what + ".t");
  return p;
}

// ---------------------------------------------------------------- cameras

inline ojson camera_json(const CameraModel& c) {
  const auto q = canonical_quaternion(c.extrinsic.rotation);
  ojson j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  j["depth_scale"] = c.depth_scale;
  j["extrinsic"] = {{"qw", q.w()}, {"qx", q.x()}, {"qy", q.y()}, {"qz", q.z()},
                    {"tx", c.extrinsic.translation.x()}, {"ty", c.extrinsic.translation.y()},
                    {"tz", c.extrinsic.translation.z()}};
  return j;
}

inline CameraModel camera_from_json(const nlohmann::json& j, const std::string& what) {
  auto num = [&](const nlohmann::json& o, const char* key, const std::string& where) {
    if (!o.contains(key) || !o[key].is_number()) throw Error(ErrorKind::kParse, where + "." + key + ": expected a number");
    return o[key].get<double>();
  };
  auto integer = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer())
      throw Error(ErrorKind::kParse, what + "." + key + ": expected an integer");
    return j[key].get<int>();
  };
  if (!j.is_object()) throw Error(ErrorKind::kParse, what + ": expected an object");
  CameraModel c;
  c.fx = num(j, "fx", what);
  c.fy = num(j, "fy", what);
  c.cx = num(j, "cx", what);
  c.cy = num(j, "cy", what);
  c.width = integer("width");
  c.height = integer("height");
  if (j.contains("depth_scale")) c.depth_scale = num(j, "depth_scale", what);
  if (!j.contains("extrinsic") || !j["extrinsic"].is_object())
    throw Error(ErrorKind::kParse, what + ".extrinsic: expected an object");
  const auto& e = j["extrinsic"];
  const std::string ew = what + ".extrinsic";
  c.extrinsic.rotation = rotation_from_quaternion(num(e, "qw", ew), num(e, "qx", ew), num(e, "qy", ew),
                                                  num(e, "qz", ew), ew);
  c.extrinsic.translation = Vec3(num(e, "tx", ew), num(e, "ty", ew), num(e, "tz", ew));
  try {
    c.validate();
  } catch (const Error& err) {
    throw Error(ErrorKind::kParse, what + ": " + err.message());
  }
  return c;
}

inline void write_cameras(const fs::path& path, const std::vector<CameraModel>& cams) {
  ojson j;
  j["cameras"] = ojson::array();
  for (const auto& c : cams) j["cameras"].push_back(camera_json(c));
  write_file(path, j.dump(2) + "\n");
}

inline std::vector<CameraModel> read_cameras(const fs::path& path) {
  const auto j = read_json_file(path);
  if (!j.is_object() || !j.contains("cameras") || !j["cameras"].is_array() || j["cameras"].empty())
    throw Error(ErrorKind::kParse, path.string() + ": expected {\"cameras\": [...]} with at least one camera");
  std::vector<CameraModel> cams;
  for (std::size_t i = 0; i < j["cameras"].size(); ++i)
    cams.push_back(camera_from_json(j["cameras"][i], path.string() + ": cameras[" + std::to_string(i) + "]"));
  return cams;
}

// ---------------------------------------------------------------- layout

enum class DepthFormat { kPng, kBin };

inline fs::path frame_dir(const fs::path& demo_dir, std::size_t t) {
  return demo_dir / ("frame_" + std::to_string(t));
}
inline fs::path depth_path(const fs::path& frame, std::size_t c, DepthFormat f) {
  return frame / ("view_" + std::to_string(c) + (f == DepthFormat::kPng ? ".depth.png" : ".depth.bin"));
}
inline fs::path color_path(const fs::path& frame, std::size_t c) {
  return frame / ("view_" + std::to_string(c) + ".color.png");
}

/// Writes one frame in the dataset layout.
inline void write_frame(const fs::path& demo_dir, std::size_t t, const Frame& frame,
                        const std::vector<CameraModel>& cams, DepthFormat format) {
  const fs::path dir = frame_dir(demo_dir, t);
  fs::create_directories(dir);
  for (std::size_t c = 0; c < frame.views.size(); ++c) {
    if (format == DepthFormat::kPng)
      write_depth_png(depth_path(dir, c, format), frame.views[c], cams[c].depth_scale);
    else
      write_depth_bin(depth_path(dir, c, format), frame.views[c]);
    write_color_png(color_path(dir, c), frame.views[c]);
  }
}

inline Frame read_frame(const fs::path& demo_dir, std::size_t t, const std::vector<CameraModel>& cams) {
  const fs::path dir = frame_dir(demo_dir, t);
  Frame f;
  for (std::size_t c = 0; c < cams.size(); ++c) {
    DepthImage img;
    const fs::path png = depth_path(dir, c, DepthFormat::kPng);
    if (fs::exists(png))
      read_depth_png(png, cams[c].depth_scale, img);
    else
      read_depth_bin(depth_path(dir, c, DepthFormat::kBin), img);
    read_color_png(color_path(dir, c), img);
    f.views.push_back(std::move(img));
  }
  return f;
}

/// Parses "frame_<t>"; returns false for any other name.
inline bool parse_frame_name(const std::string& name, std::size_t& t) {
  constexpr std::string_view prefix = "frame_";
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return false;
  const char* b = name.data() + prefix.size();
  const char* e = name.data() + name.size();
  const auto r = std::from_chars(b, e, t);
  return r.ec == std::errc() && r.ptr == e;
}

/// Opens a demo directory, checking that frames are numbered 0..T-1 and
/// every view file exists. Frames themselves are read on demand.
inline Demonstration open_demonstration(const fs::path& dir) {
  Demonstration d;
  d.id = dir.filename().string();
  d.source_path = dir;
  d.cameras = read_cameras(dir / "cameras.json");
  std::vector<std::size_t> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::size_t t;
    if (entry.is_directory() && parse_frame_name(entry.path().filename().string(), t)) frames.push_back(t);
  }
  std::sort(frames.begin(), frames.end());
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i] != i) throw Error(ErrorKind::kIo, (frame_dir(dir, i)).string() + ": missing frame directory");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const fs::path fdir = frame_dir(dir, t);
    for (std::size_t c = 0; c < d.cameras.size(); ++c) {
      if (!fs::exists(depth_path(fdir, c, DepthFormat::kPng)) && !fs::exists(depth_path(fdir, c, DepthFormat::kBin)))
        throw Error(ErrorKind::kIo, depth_path(fdir, c, DepthFormat::kPng).string() + ": missing depth image");
      if (!fs::exists(color_path(fdir, c))) throw Error(ErrorKind::kIo, color_path(fdir, c).string() + ": missing color image");
    }
  }
  d.frame_count = frames.size();
  const auto cams = d.cameras;
  d.load_frame = [dir, cams](std::size_t t) { return read_frame(dir, t, cams); };
  return d;
}

/// Demo directories (those holding cameras.json), sorted by name.
inline std::vector<fs::path> find_demonstrations(const fs::path& dataset) {
  if (!fs::is_directory(dataset)) throw Error(ErrorKind::kIo, dataset.string() + ": not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dataset))
    if (entry.is_directory() && fs::exists(entry.path() / "cameras.json")) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- records

inline std::string poses_jsonl(const PoseTrack& track) {
  std::string out;
  for (std::size_t t = 0; t < track.entries.size(); ++t) {
    const auto& e = track.entries[t];
    ojson j;
    j["frame_index"] = t;
    const ojson p = pose_json(e.pose);
    j["q"] = p["q"];
    j["t"] = p["t"];
    j["fitness"] = e.fitness;
    j["inlier_rmse"] = e.inlier_rmse;
    j["method"] = std::string(to_string(e.method));
    j["converged"] = e.converged;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::string labels_jsonl(const std::vector<LabeledStep>& steps) {
  std::string out;
  for (const auto& s : steps) {
    ojson j;
    j["t"] = s.t;
    j["pose"] = pose_json(s.pose);
    j["action"] = pose_json(s.action);
    j["fitness"] = s.fitness;
    j["flags"] = s.flags;
    j["aperture"] = nullptr;  // gripper open/close is not estimated
    out += j.dump() + "\n";
  }
  return out;
}

/// Training export: absolute goal poses, or goals relative to the current
/// pose when `relative`. Steps flagged missing are skipped unless
/// `include_flagged`.
inline std::string actions_jsonl(const std::vector<LabeledStep>& steps, bool relative, bool include_flagged) {
  std::string out;
  for (const auto& s : steps) {
    if (!include_flagged && s.excluded_by_default()) continue;
    ojson j;
    j["t"] = s.t;
    if (relative)
      j["delta"] = pose_json(compose(invert(s.pose), s.action));
    else
      j["action"] = pose_json(s.action);
    out += j.dump() + "\n";
  }
  return out;
}

inline std::string ground_truth_jsonl(const std::vector<RigidTransform>& truth) {
  std::string out;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    ojson j;
    j["frame_index"] = t;
    const ojson p = pose_json(truth[t]);
    j["q"] = p["q"];
    j["t"] = p["t"];
    out += j.dump() + "\n";
  }
  return out;
}

/// Poses from poses.jsonl or ground_truth.jsonl, checking that frame
/// indices run 0..T-1 in order.
inline std::vector<RigidTransform> read_pose_sequence(const fs::path& path) {
  std::vector<RigidTransform> out;
  const auto lines = read_jsonl(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    if (!j.is_object() || !j.contains("frame_index") || !j["frame_index"].is_number_unsigned() ||
        j["frame_index"].get<std::size_t>() != i)
      throw Error(ErrorKind::kParse, where + ": expected frame_index " + std::to_string(i));
    out.push_back(pose_from_json(j, where));
  }
  return out;
}

}  // namespace eelabel
