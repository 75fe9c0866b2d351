#pragma once

#include "eelabel/error.hpp"
#include "eelabel/ply.hpp"
#include "eelabel/point_cloud.hpp"
#include "eelabel/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace eelabel {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  void validate() const {
    for (std::size_t f = 0; f < triangles.size(); ++f)
      for (std::uint32_t i : triangles[f])
        if (i >= vertices.size())
          throw Error(ErrorKind::kIndexOutOfRange, "triangle " + std::to_string(f) + " references vertex " +
                                                       std::to_string(i) + " of " + std::to_string(vertices.size()));
  }

  double triangle_area(std::size_t f) const {
    const auto& t = triangles[f];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
  }

  double surface_area() const {
    double a = 0.0;
    for (std::size_t f = 0; f < triangles.size(); ++f) a += triangle_area(f);
    return a;
  }
};

inline TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& t) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = apply(t, v);
  return out;
}

/// Wavefront OBJ: `v x y z` and `f` records (1-based or negative relative
/// indices, `i/t/n` forms accepted); polygons are fan-triangulated. Other
/// records are ignored.
inline TriangleMesh parse_obj(std::istream& in, const std::string& name = "<obj>") {
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  struct PendingFace {
    std::vector<long long> idx;
    int line_no;
  };
  std::vector<PendingFace> faces;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key[0] == '#') continue;
    const std::string where = name + ":" + std::to_string(line_no) + ": ";
    if (key == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw Error(ErrorKind::kParse, where + "vertex needs three coordinates");
      mesh.vertices.emplace_back(x, y, z);
    } else if (key == "f") {
      PendingFace face{{}, line_no};
      std::string tok;
      while (ss >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        long long i = 0;
        try {
          std::size_t used = 0;
          i = std::stoll(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
          throw Error(ErrorKind::kParse, where + "bad face index '" + tok + "'");
        }
        if (i == 0) throw Error(ErrorKind::kParse, where + "face index 0 is invalid in OBJ");
        // Negative indices are relative to the vertices seen so far.
        face.idx.push_back(i > 0 ? i - 1 : static_cast<long long>(mesh.vertices.size()) + i);
      }
      if (face.idx.size() < 3) throw Error(ErrorKind::kParse, where + "face needs at least three vertices");
      faces.push_back(std::move(face));
    }
  }
  for (const auto& face : faces) {
    for (long long i : face.idx)
      if (i < 0 || i >= static_cast<long long>(mesh.vertices.size()))
        throw Error(ErrorKind::kIndexOutOfRange, name + ":" + std::to_string(face.line_no) + ": face index " +
                                                     std::to_string(i + 1) + " exceeds " +
                                                     std::to_string(mesh.vertices.size()) + " vertices");
    for (std::size_t k = 2; k < face.idx.size(); ++k)
      mesh.triangles.push_back({static_cast<std::uint32_t>(face.idx[0]), static_cast<std::uint32_t>(face.idx[k - 1]),
                                static_cast<std::uint32_t>(face.idx[k])});
  }
  return mesh;
}

/// Loads OBJ or PLY (chosen by extension). Units are meters.
inline TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  TriangleMesh mesh;
  if (ext == ".obj") {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
    mesh = parse_obj(in, path.string());
  } else if (ext == ".ply") {
    PlyData data = read_ply(path);
    mesh.vertices = std::move(data.cloud.positions);
    mesh.triangles = std::move(data.triangles);
  } else {
    throw Error(ErrorKind::kParse, path.string() + ": unsupported mesh extension '" + ext + "'");
  }
  mesh.validate();
  return mesh;
}

inline void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

/// Area-weighted i.i.d. surface samples. Triangle index is drawn from the
/// cumulative area table; the point inside it from folded barycentric
/// coordinates. Zero-area triangles are never selected.
inline PointCloud sample_uniform(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                                 std::vector<std::uint32_t>* triangle_ids = nullptr) {
  mesh.validate();
  if (n < 1) throw Error(ErrorKind::kInvalidArgument, "sample count must be >= 1");
  std::vector<double> cdf(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    total += mesh.triangle_area(f);
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::kEmptyMesh, "mesh has no positive-area triangle");
  CounterRng rng(seed);
  PointCloud out;
  out.positions.reserve(n);
  if (triangle_ids) {
    triangle_ids->clear();
    triangle_ids->reserve(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rng.uniform() * total;
    // First entry strictly above r: zero-width entries are never hit.
    auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    if (it == cdf.end()) it = std::prev(cdf.end());
    const auto f = static_cast<std::size_t>(it - cdf.begin());
    double u = rng.uniform();
    double v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const auto& t = mesh.triangles[f];
    const Vec3& a = mesh.vertices[t[0]];
    out.positions.push_back(a + u * (mesh.vertices[t[1]] - a) + v * (mesh.vertices[t[2]] - a));
    if (triangle_ids) triangle_ids->push_back(static_cast<std::uint32_t>(f));
  }
  return out;
}

/// Axis-aligned box with outward-wound faces (8 vertices, 12 triangles).
inline TriangleMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  m.triangles = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                 {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  return m;
}

inline void append_mesh(TriangleMesh& dst, const TriangleMesh& src) {
  const auto base = static_cast<std::uint32_t>(dst.vertices.size());
  dst.vertices.insert(dst.vertices.end(), src.vertices.begin(), src.vertices.end());
  for (auto t : src.triangles) dst.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
}

/// Parallel-jaw gripper about 10 cm wide: flange, palm and two fingers
/// along +z. Invariant under a 180 degree turn about z.
inline TriangleMesh make_gripper_mesh() {
  TriangleMesh m;
  append_mesh(m, make_box({-0.02, -0.02, -0.045}, {0.02, 0.02, -0.025}));
  append_mesh(m, make_box({-0.05, -0.015, -0.025}, {0.05, 0.015, 0.015}));
  append_mesh(m, make_box({0.025, -0.01, 0.015}, {0.045, 0.01, 0.065}));
  append_mesh(m, make_box({-0.045, -0.01, 0.015}, {-0.025, 0.01, 0.065}));
  return m;
}

}  // namespace eelabel
