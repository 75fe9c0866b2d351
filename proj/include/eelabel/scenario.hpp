#pragma once

#include "eelabel/config.hpp"
#include "eelabel/synthetic.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace eelabel {

/// Parsed scenario file: one ScenarioConfig per demo plus output options.
struct SynthPlan {
  std::vector<ScenarioConfig> demos;
  DepthFormat depth_format = DepthFormat::kPng;
  std::string model_path = "builtin:gripper";

  TriangleMesh load_model_mesh() const {
    return model_path == "builtin:gripper" ? make_gripper_mesh() : load_mesh(model_path);
  }
};

namespace detail {

inline Vec3 json_vec(JsonReader& r, const std::string& key, const Vec3& fallback) {
  if (auto v = r.get(key)) {
    try {
      return vec_from_json(*v, r.name(key));
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfig, e.message());
    }
  }
  return fallback;
}

/// One demo's scenario from a fully merged JSON object.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::string& default_name,
                                         std::uint64_t default_seed) {
  JsonReader r{j, "", {}};
  ScenarioConfig sc;
  sc.name = default_name;
  sc.seed = default_seed;
  r.string("name", sc.name);
  r.unsigned_integer("seed", sc.seed);
  std::size_t frames = 100;
  r.count("frames", frames);

  // Reference defaults first, then overrides.
  const ScenarioConfig ref = reference_scenario(1, 0);
  sc.depth_noise = ref.depth_noise;
  sc.color_noise = ref.color_noise;
  sc.clutter = ref.clutter;

  if (auto c = r.get("cameras"); c && c->is_array()) {
    for (std::size_t i = 0; i < c->size(); ++i) {
      try {
        sc.cameras.push_back(camera_from_json((*c)[i], "cameras[" + std::to_string(i) + "]"));
      } catch (const Error& e) {
        throw Error(ErrorKind::kConfig, e.message());
      }
    }
  } else {
    int count = 3, width = 320, height = 240;
    double radius = 0.55, elevation = 0.33, focal = 300.0, phase = 0.3;
    Vec3 target(0.0, 0.0, 0.12);
    if (auto s = r.object("cameras")) {
      s->integer("count", count);
      target = json_vec(*s, "target", target);
      s->number("radius", radius);
      s->number("elevation", elevation);
      s->integer("width", width);
      s->integer("height", height);
      s->number("focal", focal);
      s->number("phase", phase);
      s->done();
    }
    if (count < 1) throw Error(ErrorKind::kConfig, "cameras.count: must be >= 1");
    if (width < 1 || height < 1) throw Error(ErrorKind::kConfig, "cameras.width/height: must be >= 1");
    if (!(focal > 0.0)) throw Error(ErrorKind::kConfig, "cameras.focal: must be > 0");
    sc.cameras = make_camera_ring(count, target, radius, elevation, width, height, focal, phase);
  }

  if (auto t = r.get("trajectory"); t && t->is_array()) {
    for (std::size_t i = 0; i < t->size(); ++i) {
      try {
        sc.trajectory.push_back(pose_from_json((*t)[i], "trajectory[" + std::to_string(i) + "]"));
      } catch (const Error& e) {
        throw Error(ErrorKind::kConfig, e.message());
      }
    }
  } else {
    Vec3 center(0.0, 0.0, 0.15);
    double period = 100.0;
    if (auto s = r.object("trajectory")) {
      std::string type = "smooth";
      s->string("type", type);
      if (type != "smooth") throw Error(ErrorKind::kConfig, "trajectory.type: only \"smooth\" is supported");
      center = json_vec(*s, "center", center);
      s->number("period", period);
      s->done();
    }
    if (!(period > 0.0)) throw Error(ErrorKind::kConfig, "trajectory.period: must be > 0");
    sc.trajectory = make_smooth_trajectory(frames, center, sc.seed, period);
  }

  sc.gripper_color = json_vec(r, "gripper_color", sc.gripper_color);
  r.number("depth_noise", sc.depth_noise);
  r.number("color_noise", sc.color_noise);
  r.number("dropout", sc.dropout);
  if (auto s = r.object("clutter")) {
    s->integer("boxes", sc.clutter.boxes);
    s->number("size_min", sc.clutter.size_min);
    s->number("size_max", sc.clutter.size_max);
    sc.clutter.center = json_vec(*s, "center", sc.clutter.center);
    s->number("ring_inner", sc.clutter.ring_inner);
    s->number("ring_outer", sc.clutter.ring_outer);
    s->number("gray_min", sc.clutter.gray_min);
    s->number("gray_max", sc.clutter.gray_max);
    s->done();
  }
  if (auto s = r.object("speck")) {
    s->boolean("enabled", sc.speck.enabled);
    sc.speck.position = json_vec(*s, "position", sc.speck.position);
    s->number("size", sc.speck.size);
    s->done();
  }
  r.boolean("hide_gripper", sc.hide_gripper);
  r.number("splat_density", sc.splat_density);
  r.done();
  sc.validate();
  return sc;
}

}  // namespace detail

/// Scenario file: a base scenario plus "demos" (a count, or a list of
/// per-demo override objects merged onto the base). Demo i defaults to name
/// "<name>_<iii>" and seed base_seed + i. `seed_override` replaces the base
/// seed. Relative model paths resolve against `base_dir`.
inline SynthPlan parse_scenario(const nlohmann::json& file, const std::filesystem::path& base_dir = {},
                                std::optional<std::uint64_t> seed_override = std::nullopt) {
  if (!file.is_object()) throw Error(ErrorKind::kConfig, "scenario: expected a JSON object");
  SynthPlan plan;
  nlohmann::json base = file;
  std::vector<nlohmann::json> overrides;
  if (base.contains("demos")) {
    const auto& d = base["demos"];
    if (d.is_number_unsigned()) {
      if (d.get<std::size_t>() < 1) throw Error(ErrorKind::kConfig, "demos: must be >= 1");
      overrides.assign(d.get<std::size_t>(), nlohmann::json::object());
    } else if (d.is_array() && !d.empty()) {
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!d[i].is_object()) throw Error(ErrorKind::kConfig, "demos[" + std::to_string(i) + "]: expected an object");
        overrides.push_back(d[i]);
      }
    } else {
      throw Error(ErrorKind::kConfig, "demos: expected a positive count or a nonempty list of objects");
    }
    base.erase("demos");
  } else {
    overrides.push_back(nlohmann::json::object());
  }
  if (base.contains("depth_format")) {
    const auto& f = base["depth_format"];
    if (f == "png")
      plan.depth_format = DepthFormat::kPng;
    else if (f == "bin")
      plan.depth_format = DepthFormat::kBin;
    else
      throw Error(ErrorKind::kConfig, "depth_format: expected \"png\" or \"bin\"");
    base.erase("depth_format");
  }
  if (base.contains("model")) {
    if (!base["model"].is_string()) throw Error(ErrorKind::kConfig, "model: expected a path string");
    plan.model_path = base["model"].get<std::string>();
    if (plan.model_path != "builtin:gripper" && std::filesystem::path(plan.model_path).is_relative() &&
        !base_dir.empty())
      plan.model_path = (base_dir / plan.model_path).lexically_normal().string();
    if (plan.model_path != "builtin:gripper" && !std::filesystem::is_regular_file(plan.model_path))
      throw Error(ErrorKind::kConfig, "model: file not found: " + plan.model_path);
    base.erase("model");
  }
  std::uint64_t seed = 0;
  if (base.contains("seed")) {
    if (!base["seed"].is_number_unsigned()) throw Error(ErrorKind::kConfig, "seed: expected a non-negative integer");
    seed = base["seed"].get<std::uint64_t>();
  }
  if (seed_override) seed = *seed_override;
  base.erase("seed");
  std::string name = "demo";
  if (base.contains("name")) {
    if (!base["name"].is_string()) throw Error(ErrorKind::kConfig, "name: expected a string");
    name = base["name"].get<std::string>();
    base.erase("name");
  }
  const bool single = overrides.size() == 1 && !file.contains("demos");
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    nlohmann::json merged = base;
    merged.merge_patch(overrides[i]);
    char suffix[24];
    std::snprintf(suffix, sizeof suffix, "_%03zu", i);
    const std::string prefix = overrides.size() > 1 || !single ? "demos[" + std::to_string(i) + "]: " : "";
    try {
      plan.demos.push_back(detail::scenario_from_json(merged, single ? name : name + suffix, seed + i));
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfig, prefix + e.message());
    }
  }
  std::set<std::string> names;
  for (const auto& d : plan.demos) {
    if (d.name.find('/') != std::string::npos || d.name == "." || d.name == "..")
      throw Error(ErrorKind::kConfig, "name: '" + d.name + "' is not a valid directory name");
    if (!names.insert(d.name).second) throw Error(ErrorKind::kConfig, "name: duplicate demo name '" + d.name + "'");
  }
  return plan;
}

}  // namespace eelabel
