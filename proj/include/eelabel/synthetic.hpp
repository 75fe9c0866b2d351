#pragma once

#include "eelabel/camera.hpp"
#include "eelabel/demonstration.hpp"
#include "eelabel/mesh.hpp"
#include "eelabel/rng.hpp"
#include "eelabel/tracking.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

namespace eelabel {

/// Which scene element a pixel's depth came from.
enum class PixelLabel : std::uint8_t { kBackground = 0, kGripper = 1, kClutter = 2, kSpeck = 3 };

/// Dense surface samples of a mesh with the triangle each came from.
struct SplatSurface {
  TriangleMesh mesh;
  std::vector<Vec3> points;
  std::vector<std::uint32_t> triangles;
};

inline SplatSurface make_splats(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  SplatSurface s;
  s.mesh = mesh;
  s.points = sample_uniform(mesh, n, seed, &s.triangles).positions;
  return s;
}

/// Splats needed so that a pixel footprint at depth `z_min` holds
/// `density` samples on average.
inline std::size_t splat_count(double area, double z_min, double fx, double fy, double density) {
  constexpr std::size_t kMax = 4'000'000;
  const double z = std::max(z_min, 0.02);
  const double footprint = (z / fx) * (z / fy);
  const double n = std::ceil(density * area / footprint);
  return static_cast<std::size_t>(std::clamp(n, 1.0, static_cast<double>(kMax)));
}

struct RenderObject {
  const SplatSurface* surface = nullptr;
  RigidTransform pose;
  Vec3 color = Vec3::Zero();
  PixelLabel label = PixelLabel::kClutter;
};

struct SensorNoise {
  double depth_sigma = 0.0;
  double color_sigma = 0.0;
  double dropout = 0.0;
};

struct RenderResult {
  DepthImage image;
  std::vector<PixelLabel> labels;
};

namespace detail {

/// Ray from the camera center through pixel direction `d` (z = 1); returns
/// the ray parameter (equal to camera-frame depth) or +inf on a miss.
inline double ray_triangle(const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
  constexpr double kEdgeTol = 1e-9;
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = d.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-18) return std::numeric_limits<double>::infinity();
  const double inv = 1.0 / det;
  const Vec3 s = -a;
  const double u = s.dot(p) * inv;
  if (u < -kEdgeTol || u > 1.0 + kEdgeTol) return std::numeric_limits<double>::infinity();
  const Vec3 q = s.cross(e1);
  const double v = d.dot(q) * inv;
  if (v < -kEdgeTol || u + v > 1.0 + kEdgeTol) return std::numeric_limits<double>::infinity();
  const double t = e2.dot(q) * inv;
  return t > 0.0 ? t : std::numeric_limits<double>::infinity();
}

struct Candidate {
  std::uint32_t object;
  std::uint32_t triangle;
  double z;
};

}  // namespace detail

/// Point-splat renderer. Splats are z-buffered into per-pixel candidate
/// lists (nearest few distinct triangles); each covered pixel's depth is then
/// the exact intersection of its center ray with the nearest candidate
/// triangle, so noiseless depth lies on the surface. Noise and dropout are
/// drawn from `rng` in pixel order.
inline RenderResult render_scene(std::span<const RenderObject> objects, const CameraModel& cam,
                                 const SensorNoise& noise, CounterRng& rng) {
  constexpr std::size_t kSlots = 8;
  const std::size_t npix = static_cast<std::size_t>(cam.width) * cam.height;
  std::vector<std::array<detail::Candidate, kSlots>> slots(npix);
  std::vector<std::uint8_t> used(npix, 0);
  const Mat3 rc = cam.extrinsic.rotation.transpose();

  std::vector<std::vector<Vec3>> local_vertices(objects.size());
  for (std::size_t o = 0; o < objects.size(); ++o) {
    const auto& obj = objects[o];
    const Mat3 m = rc * obj.pose.rotation;
    const Vec3 b = rc * (obj.pose.translation - cam.extrinsic.translation);
    for (const auto& v : obj.surface->mesh.vertices) local_vertices[o].push_back(m * v + b);
    for (std::size_t i = 0; i < obj.surface->points.size(); ++i) {
      const Vec3 p = m * obj.surface->points[i] + b;
      if (p.z() <= 0.0) continue;
      const double u = std::round(cam.fx * p.x() / p.z() + cam.cx);
      const double v = std::round(cam.fy * p.y() / p.z() + cam.cy);
      if (u < 0 || v < 0 || u >= cam.width || v >= cam.height) continue;
      const std::size_t pix = static_cast<std::size_t>(v) * cam.width + static_cast<std::size_t>(u);
      const detail::Candidate cand{static_cast<std::uint32_t>(o), obj.surface->triangles[i], p.z()};
      auto& list = slots[pix];
      std::uint8_t& n = used[pix];
      std::size_t k = 0;
      while (k < n && !(list[k].object == cand.object && list[k].triangle == cand.triangle)) ++k;
      if (k < n) {
        list[k].z = std::min(list[k].z, cand.z);
        continue;
      }
      if (n < kSlots) {
        list[n++] = cand;
        continue;
      }
      auto far = std::max_element(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.z < b.z; });
      if (cand.z < far->z) *far = cand;
    }
  }

  RenderResult out{DepthImage(cam.width, cam.height), std::vector<PixelLabel>(npix, PixelLabel::kBackground)};
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const std::size_t pix = out.image.index(u, v);
      if (used[pix] == 0) continue;
      const Vec3 dir((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t best_obj = 0;
      for (std::size_t k = 0; k < used[pix]; ++k) {
        const auto& c = slots[pix][k];
        const auto& tri = objects[c.object].surface->mesh.triangles[c.triangle];
        const auto& lv = local_vertices[c.object];
        const double t = detail::ray_triangle(dir, lv[tri[0]], lv[tri[1]], lv[tri[2]]);
        if (t < best || (t == best && c.object < best_obj)) {
          best = t;
          best_obj = c.object;
        }
      }
      if (!std::isfinite(best)) continue;
      double depth = best;
      Vec3 color = objects[best_obj].color;
      if (noise.dropout > 0.0 && rng.uniform() < noise.dropout) continue;
      if (noise.depth_sigma > 0.0) depth += noise.depth_sigma * rng.normal();
      if (noise.color_sigma > 0.0)
        for (int ch = 0; ch < 3; ++ch) color[ch] += noise.color_sigma * rng.normal();
      if (!(depth > 0.0)) continue;
      out.image.depth[pix] = depth;
      out.image.color[pix] = color.cwiseMax(0.0).cwiseMin(1.0);
      out.labels[pix] = objects[best_obj].label;
    }
  }
  return out;
}

/// Renders one mesh in isolation; splat count follows `splat_density`
/// samples per pixel footprint at the mesh's nearest vertex.
inline DepthImage render_depth_image(const TriangleMesh& mesh, const RigidTransform& pose, const CameraModel& cam,
                                     const Vec3& color, std::uint64_t seed, const SensorNoise& noise = {},
                                     double splat_density = 20.0) {
  mesh.validate();
  double z_min = std::numeric_limits<double>::infinity();
  for (const auto& v : mesh.vertices) {
    const double z = project_point(cam, apply(pose, v)).depth;
    if (z > 0.0) z_min = std::min(z_min, z);
  }
  if (!std::isfinite(z_min)) return DepthImage(cam.width, cam.height);
  const SplatSurface s = make_splats(mesh, splat_count(mesh.surface_area(), z_min, cam.fx, cam.fy, splat_density),
                                     mix64(seed ^ 0x5EA7ull));
  const RenderObject obj{&s, pose, color, PixelLabel::kGripper};
  CounterRng rng(seed, 1);
  return render_scene(std::span<const RenderObject>(&obj, 1), cam, noise, rng).image;
}

/// Static gray boxes resting on the z = 0 plane inside an annulus around
/// `center`.
struct ClutterSpec {
  int boxes = 0;
  double size_min = 0.03;
  double size_max = 0.06;
  Vec3 center = Vec3::Zero();
  double ring_inner = 0.15;
  double ring_outer = 0.3;
  double gray_min = 0.35;
  double gray_max = 0.75;
};

/// Small green cube away from the gripper, to exercise cluster selection.
struct SpeckSpec {
  bool enabled = false;
  Vec3 position = Vec3(0.2, 0.2, 0.15);
  double size = 0.005;
};

struct ScenarioConfig {
  std::string name = "demo";
  std::vector<RigidTransform> trajectory;
  std::vector<CameraModel> cameras;
  Vec3 gripper_color = Vec3(0.15, 0.75, 0.25);
  double depth_noise = 0.0;
  double color_noise = 0.0;
  double dropout = 0.0;
  ClutterSpec clutter;
  SpeckSpec speck;
  bool hide_gripper = false;
  double splat_density = 20.0;
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const std::string& field, const std::string& why) {
      throw Error(ErrorKind::kConfig, field + ": " + why);
    };
    if (name.empty()) bad("name", "must be nonempty");
    if (trajectory.empty()) bad("trajectory", "needs at least one pose");
    for (const auto& p : trajectory)
      if (!p.is_valid()) bad("trajectory", "contains a non-rigid pose");
    if (cameras.empty()) bad("cameras", "needs at least one camera");
    if (cameras.size() > 255) bad("cameras", "at most 255 cameras");
    for (const auto& c : cameras) {
      try {
        c.validate();
      } catch (const Error& e) {
        bad("cameras", e.what());
      }
    }
    for (int ch = 0; ch < 3; ++ch)
      if (!(gripper_color[ch] >= 0.0 && gripper_color[ch] <= 1.0)) bad("gripper_color", "components must be in [0, 1]");
    if (!(depth_noise >= 0.0)) bad("depth_noise", "must be >= 0");
    if (!(color_noise >= 0.0)) bad("color_noise", "must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout", "must be in [0, 1)");
    if (clutter.boxes < 0) bad("clutter.boxes", "must be >= 0");
    if (!(clutter.size_min > 0.0 && clutter.size_max >= clutter.size_min)) bad("clutter.size", "need 0 < min <= max");
    if (!(clutter.ring_inner >= 0.0 && clutter.ring_outer >= clutter.ring_inner))
      bad("clutter.ring", "need 0 <= inner <= outer");
    if (!(clutter.gray_min >= 0.0 && clutter.gray_max <= 1.0 && clutter.gray_min <= clutter.gray_max))
      bad("clutter.gray", "need 0 <= min <= max <= 1");
    if (speck.enabled && !(speck.size > 0.0)) bad("speck.size", "must be > 0");
    if (!(splat_density >= 20.0)) bad("splat_density", "must be >= 20 samples per pixel footprint");
  }
};

struct SyntheticFrame {
  Frame frame;
  std::vector<std::vector<PixelLabel>> labels;  // per view, per pixel
};

/// Scene geometry for one scenario. Frames render independently from
/// per-(frame, camera) random streams, so any subset can be produced in any
/// order or concurrently with identical results.
class SyntheticScene {
 public:
  SyntheticScene(const TriangleMesh& gripper, ScenarioConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    gripper.validate();
    double z_min = std::numeric_limits<double>::infinity();
    double fmax = 0.0;
    for (const auto& cam : cfg_.cameras) {
      fmax = std::max({fmax, cam.fx, cam.fy});
      for (const auto& pose : cfg_.trajectory)
        for (const auto& v : gripper.vertices) {
          const double z = project_point(cam, apply(pose, v)).depth;
          if (z > 0.0) z_min = std::min(z_min, z);
        }
    }
    if (!std::isfinite(z_min)) z_min = 1.0;
    auto count = [&](const TriangleMesh& m) {
      return splat_count(m.surface_area(), z_min, fmax, fmax, cfg_.splat_density);
    };
    gripper_ = make_splats(gripper, count(gripper), mix64(cfg_.seed ^ 0x6121'77E5ull));

    CounterRng rng(cfg_.seed, kClutterStream);
    const auto& cs = cfg_.clutter;
    for (int b = 0; b < cs.boxes; ++b) {
      const double r = rng.uniform(cs.ring_inner, cs.ring_outer);
      const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const Vec3 size(rng.uniform(cs.size_min, cs.size_max), rng.uniform(cs.size_min, cs.size_max),
                      rng.uniform(cs.size_min, cs.size_max));
      const double yaw = rng.uniform(0.0, std::numbers::pi);
      const double gray = rng.uniform(cs.gray_min, cs.gray_max);
      const Vec3 c = cs.center + Vec3(r * std::cos(a), r * std::sin(a), 0.0);
      TriangleMesh box = make_box(-0.5 * size, 0.5 * size);
      RigidTransform place = rot_z(yaw);
      place.translation = Vec3(c.x(), c.y(), 0.5 * size.z());
      box = transformed(box, place);
      const double z_box = min_depth(box);
      clutter_.push_back({make_splats(box, splat_count(box.surface_area(), z_box, fmax, fmax, cfg_.splat_density),
                                      mix64(cfg_.seed ^ (0xB0C5ull + static_cast<std::uint64_t>(b)))),
                          Vec3::Constant(gray)});
    }
    if (cfg_.speck.enabled) {
      const TriangleMesh cube = transformed(make_box(Vec3::Constant(-0.5 * cfg_.speck.size), Vec3::Constant(0.5 * cfg_.speck.size)),
                                            RigidTransform::from_translation(cfg_.speck.position));
      speck_ = make_splats(cube, splat_count(cube.surface_area(), min_depth(cube), fmax, fmax, cfg_.splat_density),
                           mix64(cfg_.seed ^ 0x5BECull));
    }
  }

  const ScenarioConfig& config() const { return cfg_; }
  std::size_t frame_count() const { return cfg_.trajectory.size(); }
  const std::vector<RigidTransform>& truth() const { return cfg_.trajectory; }

  SyntheticFrame render_frame(std::size_t t) const {
    if (t >= frame_count()) throw Error(ErrorKind::kIndexOutOfRange, "synthetic frame " + std::to_string(t));
    std::vector<RenderObject> objects;
    if (!cfg_.hide_gripper) objects.push_back({&gripper_, cfg_.trajectory[t], cfg_.gripper_color, PixelLabel::kGripper});
    for (const auto& c : clutter_)
      objects.push_back({&c.surface, RigidTransform::identity(), c.color, PixelLabel::kClutter});
    if (cfg_.speck.enabled)
      objects.push_back({&speck_, RigidTransform::identity(), cfg_.gripper_color, PixelLabel::kSpeck});
    const SensorNoise noise{cfg_.depth_noise, cfg_.color_noise, cfg_.dropout};
    SyntheticFrame out;
    for (std::size_t c = 0; c < cfg_.cameras.size(); ++c) {
      CounterRng rng(cfg_.seed, (static_cast<std::uint64_t>(t) << 8) | c);
      RenderResult r = render_scene(objects, cfg_.cameras[c], noise, rng);
      out.frame.views.push_back(std::move(r.image));
      out.labels.push_back(std::move(r.labels));
    }
    return out;
  }

 private:
  static constexpr std::uint64_t kClutterStream = 0xC100'0000'0000'0000ull;

  struct Clutter {
    SplatSurface surface;
    Vec3 color;
  };

  double min_depth(const TriangleMesh& m) const {
    double z_min = std::numeric_limits<double>::infinity();
    for (const auto& cam : cfg_.cameras)
      for (const auto& v : m.vertices) {
        const double z = project_point(cam, v).depth;
        if (z > 0.0) z_min = std::min(z_min, z);
      }
    return std::isfinite(z_min) ? z_min : 1.0;
  }

  ScenarioConfig cfg_;
  SplatSurface gripper_;
  std::vector<Clutter> clutter_;
  SplatSurface speck_;
};

struct SyntheticDemo {
  Demonstration demo;
  std::shared_ptr<const SyntheticScene> scene;
  const std::vector<RigidTransform>& truth() const { return scene->truth(); }
};

inline SyntheticDemo generate_synthetic_demo(const TriangleMesh& mesh, const ScenarioConfig& scenario) {
  auto scene = std::make_shared<const SyntheticScene>(mesh, scenario);
  SyntheticDemo out;
  out.scene = scene;
  out.demo.id = scenario.name;
  out.demo.source_path = "synthetic:" + scenario.name;
  out.demo.cameras = scenario.cameras;
  out.demo.frame_count = scene->frame_count();
  out.demo.load_frame = [scene](std::size_t t) { return scene->render_frame(t).frame; };
  return out;
}

/// `count` cameras evenly spaced on a horizontal circle of `radius` at
/// `height` above `target`, all looking at `target`.
inline std::vector<CameraModel> make_camera_ring(int count, const Vec3& target, double radius, double height,
                                                 int width = 320, int image_height = 240, double focal = 300.0,
                                                 double phase = 0.3) {
  std::vector<CameraModel> cams;
  for (int k = 0; k < count; ++k) {
    const double a = phase + 2.0 * std::numbers::pi * k / count;
    CameraModel c;
    c.fx = c.fy = focal;
    c.cx = (width - 1) / 2.0;
    c.cy = (image_height - 1) / 2.0;
    c.width = width;
    c.height = image_height;
    c.extrinsic = look_at(target + Vec3(radius * std::cos(a), radius * std::sin(a), height), target);
    cams.push_back(c);
  }
  return cams;
}

/// Smooth closed trajectory with fingers pointing down: the position traces
/// a Lissajous curve around `center` and the orientation sweeps yaw and
/// tilt sinusoidally. With the default amplitudes consecutive frames move
/// under 1 cm and 5 degrees. One period spans `period` frames.
inline std::vector<RigidTransform> make_smooth_trajectory(std::size_t frames, const Vec3& center, std::uint64_t seed,
                                                          double period = 100.0) {
  CounterRng rng(seed, 0x7A1ull);
  const double ph1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ph2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ph3 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ph4 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<RigidTransform> out;
  const double w = 2.0 * std::numbers::pi / period;
  for (std::size_t k = 0; k < frames; ++k) {
    const double s = w * static_cast<double>(k);
    const Vec3 p = center + Vec3(0.06 * std::sin(s + ph1), 0.05 * std::sin(2.0 * s + ph2), 0.02 * std::sin(s + ph3));
    const double yaw = 0.6 * std::sin(s + ph4);
    const double tilt = 0.2 * std::sin(2.0 * s + ph1);
    RigidTransform pose = compose(rot_z(yaw), compose(rotation_about(Vec3::UnitY(), tilt),
                                                      rotation_about(Vec3::UnitX(), std::numbers::pi)));
    pose.translation = p;
    out.push_back(pose);
  }
  return out;
}

/// The benchmark setup: three 320x240 cameras around a gripper-scale
/// workspace, 2 mm depth noise, and gray boxes contributing about as many
/// scene points as the gripper.
inline ScenarioConfig reference_scenario(std::size_t frames, std::uint64_t seed) {
  ScenarioConfig sc;
  sc.name = "demo_" + std::to_string(seed);
  sc.trajectory = make_smooth_trajectory(frames, Vec3(0.0, 0.0, 0.15), seed);
  sc.cameras = make_camera_ring(3, Vec3(0.0, 0.0, 0.12), 0.55, 0.33);
  sc.depth_noise = 0.002;
  sc.color_noise = 0.02;
  sc.clutter.boxes = 4;
  sc.clutter.size_min = 0.038;
  sc.clutter.size_max = 0.038;
  sc.seed = seed;
  return sc;
}

struct PoseError {
  double translation = 0.0;
  double rotation = 0.0;
};

/// Translation distance and the smallest rotation angle over the symmetry
/// group.
inline PoseError pose_error(const RigidTransform& estimated, const RigidTransform& truth, const SymmetryGroup& g) {
  PoseError e;
  e.translation = (estimated.translation - truth.translation).norm();
  e.rotation = std::numeric_limits<double>::infinity();
  for (const auto& s : g.elements) e.rotation = std::min(e.rotation, rotation_geodesic(compose(estimated, s), truth));
  return e;
}

}  // namespace eelabel
