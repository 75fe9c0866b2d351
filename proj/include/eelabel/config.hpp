#pragma once

#include "eelabel/dataset.hpp"
#include "eelabel/labeling.hpp"
#include "eelabel/mesh.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace eelabel {

/// Typed field access that records which keys were consumed so leftovers
/// can be reported as unknown.
struct JsonReader {
  const nlohmann::json& j;
  std::string prefix;
  std::set<std::string> seen;

  std::string name(const std::string& key) const { return prefix + key; }
  [[noreturn]] void bad(const std::string& key, const std::string& want) const {
    throw Error(ErrorKind::kConfig, name(key) + ": expected " + want);
  }
  const nlohmann::json* get(const std::string& key) {
    if (!j.contains(key)) return nullptr;
    seen.insert(key);
    return &j[key];
  }
  void number(const std::string& key, double& out) {
    if (auto v = get(key)) {
      if (!v->is_number()) bad(key, "a number");
      out = v->get<double>();
    }
  }
  void integer(const std::string& key, int& out) {
    if (auto v = get(key)) {
      if (!v->is_number_integer()) bad(key, "an integer");
      out = v->get<int>();
    }
  }
  void count(const std::string& key, std::size_t& out) {
    if (auto v = get(key)) {
      if (!v->is_number_unsigned()) bad(key, "a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void unsigned_integer(const std::string& key, std::uint64_t& out) {
    if (auto v = get(key)) {
      if (!v->is_number_unsigned()) bad(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (auto v = get(key)) {
      if (!v->is_boolean()) bad(key, "true or false");
      out = v->get<bool>();
    }
  }
  bool string(const std::string& key, std::string& out) {
    if (auto v = get(key)) {
      if (!v->is_string()) bad(key, "a string");
      out = v->get<std::string>();
      return true;
    }
    return false;
  }
  std::optional<JsonReader> object(const std::string& key) {
    if (auto v = get(key)) {
      if (!v->is_object()) bad(key, "an object");
      return JsonReader{*v, name(key) + ".", {}};
    }
    return std::nullopt;
  }
  void done() const {
    for (const auto& it : j.items())
      if (!seen.count(it.key())) throw Error(ErrorKind::kConfig, name(it.key()) + ": unknown field");
  }
};

/// Symmetry given as a rotation axis and cyclic order; order 1 = none.
struct SymmetrySpec {
  Vec3 axis = Vec3::UnitZ();
  int order = 2;

  SymmetryGroup group() const { return order == 1 ? SymmetryGroup::trivial() : SymmetryGroup::cyclic(axis, order); }

  /// "none", "z:2", "x:4" or "ax,ay,az:order".
  static SymmetrySpec parse(const std::string& s) {
    SymmetrySpec out;
    if (s == "none") {
      out.order = 1;
      return out;
    }
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorKind::kConfig, "symmetry: expected none or <axis>:<order>, got '" + s + "'");
    const std::string axis = s.substr(0, colon);
    try {
      std::size_t used = 0;
      out.order = std::stoi(s.substr(colon + 1), &used);
      if (used != s.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, "symmetry: bad order in '" + s + "'");
    }
    if (axis == "x") {
      out.axis = Vec3::UnitX();
    } else if (axis == "y") {
      out.axis = Vec3::UnitY();
    } else if (axis == "z") {
      out.axis = Vec3::UnitZ();
    } else {
      std::istringstream in(axis);
      char c1 = 0, c2 = 0;
      if (!(in >> out.axis.x() >> c1 >> out.axis.y() >> c2 >> out.axis.z()) || c1 != ',' || c2 != ',' || !in.eof())
        throw Error(ErrorKind::kConfig, "symmetry: bad axis in '" + s + "'");
    }
    if (out.order < 1) throw Error(ErrorKind::kConfig, "symmetry: order must be >= 1");
    if (!(out.axis.norm() > 0.0)) throw Error(ErrorKind::kConfig, "symmetry: axis must be nonzero");
    return out;
  }
};

struct ExportOptions {
  bool actions = true;           // write actions.jsonl
  bool relative_actions = false;  // deltas from the current pose instead of absolute goals
  bool include_flagged = false;   // keep steps whose pose or goal is missing
};

/// Everything `label` needs besides the dataset. Parsed from one JSON file;
/// omitted fields keep their defaults, unknown fields are errors.
struct PipelineConfig {
  double voxel_size = 0.005;
  ColorFilter color;
  ClusterParams cluster;
  TrackingParams tracking;
  SymmetrySpec symmetry;
  std::string model_path = "builtin:gripper";
  std::size_t model_samples = 5000;
  std::uint64_t model_seed = 1;
  std::uint64_t seed = 0;  // RANSAC stream
  int jobs = 1;
  ExportOptions exports;

  LabelingParams labeling_params() const {
    LabelingParams p;
    p.voxel = voxel_size;
    p.color = color;
    p.cluster = cluster;
    p.tracking = tracking;
    p.tracking.registration.ransac.seed = seed;
    p.symmetry = symmetry.group();
    return p;
  }

  /// Checks ranges and that the model file exists; errors name the field.
  void validate() const {
    auto check = [](const char* field, const std::function<void()>& f) {
      try {
        f();
      } catch (const Error& e) {
        throw Error(ErrorKind::kConfig, std::string(field) + ": " + e.message());
      }
    };
    if (!(voxel_size > 0.0)) throw Error(ErrorKind::kConfig, "voxel_size: must be > 0");
    check("color_filter", [&] { color.validate(); });
    check("cluster", [&] { cluster.validate(); });
    check("registration", [&] { tracking.validate(); });
    if (symmetry.order < 1) throw Error(ErrorKind::kConfig, "symmetry.order: must be >= 1");
    if (!(symmetry.axis.norm() > 0.0)) throw Error(ErrorKind::kConfig, "symmetry.axis: must be nonzero");
    if (model_samples < 100) throw Error(ErrorKind::kConfig, "model.samples: must be >= 100");
    if (jobs < 1) throw Error(ErrorKind::kConfig, "jobs: must be >= 1");
    if (model_path != "builtin:gripper" && !std::filesystem::is_regular_file(model_path))
      throw Error(ErrorKind::kConfig, "model.path: file not found: " + model_path);
  }

  TriangleMesh load_model_mesh() const {
    return model_path == "builtin:gripper" ? make_gripper_mesh() : load_mesh(model_path);
  }

  /// Hash of the model geometry source: file bytes, or the built-in mesh
  /// serialized as OBJ.
  std::string model_hash() const {
    if (model_path != "builtin:gripper") return fnv1a_hex(read_file(model_path));
    std::ostringstream obj;
    const TriangleMesh m = make_gripper_mesh();
    obj.precision(17);
    for (const auto& v : m.vertices) obj << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& f : m.triangles) obj << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    return fnv1a_hex(obj.str());
  }

  /// Full JSON form; `jobs` is included but never affects outputs.
  ojson to_json() const {
    const auto& reg = tracking.registration;
    ojson j;
    j["voxel_size"] = voxel_size;
    j["color_filter"] = {{"hue_min", color.hue_min}, {"hue_max", color.hue_max}, {"sat_min", color.sat_min},
                         {"val_min", color.val_min}};
    j["cluster"] = {{"link_radius", cluster.link_radius}, {"min_size", cluster.min_size}};
    j["registration"] = {
        {"normal_k", reg.normal_k},
        {"fpfh_radius", reg.fpfh_radius},
        {"ransac",
         {{"max_iterations", reg.ransac.max_iterations},
          {"confidence", reg.ransac.confidence},
          {"inlier_distance", reg.ransac.inlier_distance},
          {"sample_size", reg.ransac.sample_size},
          {"edge_similarity", reg.ransac.edge_similarity}}},
        {"icp",
         {{"max_correspondence_distance", reg.icp.max_correspondence_distance},
          {"max_iterations", reg.icp.max_iterations},
          {"relative_rmse", reg.icp.relative_rmse},
          {"variant", reg.icp.variant == IcpVariant::kPointToPlane ? "point_to_plane" : "point_to_point"},
          {"min_fitness", reg.icp.min_fitness}}}};
    j["reregister_fitness"] = tracking.reregister_fitness;
    j["symmetry"] = {{"axis", vec_json(symmetry.axis)}, {"order", symmetry.order}};
    j["model"] = {{"path", model_path}, {"samples", model_samples}, {"seed", model_seed}};
    j["seed"] = seed;
    j["jobs"] = jobs;
    j["export"] = {{"actions", exports.actions},
                   {"relative_actions", exports.relative_actions},
                   {"include_flagged", exports.include_flagged}};
    return j;
  }

  /// Hash over everything that can change outputs (all fields but `jobs`).
  std::string hash() const {
    ojson j = to_json();
    j.erase("jobs");
    j["model"]["path"] = model_hash();
    return fnv1a_hex(j.dump());
  }

  /// Overlays `j` onto the defaults. Relative model paths resolve against
  /// `base_dir`.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    PipelineConfig c;
    if (!j.is_object()) throw Error(ErrorKind::kConfig, "config: expected a JSON object");
    JsonReader r{j, "", {}};
    r.number("voxel_size", c.voxel_size);
    // Registration radii follow the voxel unless given explicitly.
    c.tracking.registration = RegistrationConfig::for_voxel(c.voxel_size);
    if (auto s = r.object("color_filter")) {
      s->number("hue_min", c.color.hue_min);
      s->number("hue_max", c.color.hue_max);
      s->number("sat_min", c.color.sat_min);
      s->number("val_min", c.color.val_min);
      s->done();
    }
    if (auto s = r.object("cluster")) {
      s->number("link_radius", c.cluster.link_radius);
      s->count("min_size", c.cluster.min_size);
      s->done();
    }
    auto& reg = c.tracking.registration;
    if (auto s = r.object("registration")) {
      s->count("normal_k", reg.normal_k);
      s->number("fpfh_radius", reg.fpfh_radius);
      if (auto q = s->object("ransac")) {
        q->integer("max_iterations", reg.ransac.max_iterations);
        q->number("confidence", reg.ransac.confidence);
        q->number("inlier_distance", reg.ransac.inlier_distance);
        q->integer("sample_size", reg.ransac.sample_size);
        q->number("edge_similarity", reg.ransac.edge_similarity);
        q->done();
      }
      if (auto q = s->object("icp")) {
        q->number("max_correspondence_distance", reg.icp.max_correspondence_distance);
        q->integer("max_iterations", reg.icp.max_iterations);
        q->number("relative_rmse", reg.icp.relative_rmse);
        std::string variant;
        if (q->string("variant", variant)) {
          if (variant == "point_to_plane")
            reg.icp.variant = IcpVariant::kPointToPlane;
          else if (variant == "point_to_point")
            reg.icp.variant = IcpVariant::kPointToPoint;
          else
            throw Error(ErrorKind::kConfig, "registration.icp.variant: expected point_to_plane or point_to_point");
        }
        q->number("min_fitness", reg.icp.min_fitness);
        q->done();
      }
      s->done();
    }
    r.number("reregister_fitness", c.tracking.reregister_fitness);
    if (auto s = r.object("symmetry")) {
      if (s->j.contains("axis")) {
        try {
          c.symmetry.axis = vec_from_json(s->j["axis"], "symmetry.axis");
        } catch (const Error& e) {
          throw Error(ErrorKind::kConfig, e.message());
        }
        s->seen.insert("axis");
      }
      s->integer("order", c.symmetry.order);
      s->done();
    }
    if (auto s = r.object("model")) {
      s->string("path", c.model_path);
      s->count("samples", c.model_samples);
      s->unsigned_integer("seed", c.model_seed);
      s->done();
    }
    r.unsigned_integer("seed", c.seed);
    r.integer("jobs", c.jobs);
    if (auto s = r.object("export")) {
      s->boolean("actions", c.exports.actions);
      s->boolean("relative_actions", c.exports.relative_actions);
      s->boolean("include_flagged", c.exports.include_flagged);
      s->done();
    }
    r.done();
    if (c.model_path != "builtin:gripper" && std::filesystem::path(c.model_path).is_relative() && !base_dir.empty())
      c.model_path = (base_dir / c.model_path).lexically_normal().string();
    return c;
  }

  static PipelineConfig load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
      j = read_json_file(path);
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfig, e.message());
    }
    return from_json(j, path.parent_path());
  }
};

}  // namespace eelabel
