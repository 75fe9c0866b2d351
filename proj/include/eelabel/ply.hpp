#pragma once

#include "eelabel/error.hpp"
#include "eelabel/point_cloud.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace eelabel {

using Triangle = std::array<std::uint32_t, 3>;

/// Contents of a PLY file: the vertex element as a cloud plus faces (fan-
/// triangulated), if any.
struct PlyData {
  PointCloud cloud;
  std::vector<Triangle> triangles;
};

namespace ply_detail {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

enum class Type { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

inline bool parse_type(const std::string& s, Type& t) {
  if (s == "char" || s == "int8") t = Type::kI8;
  else if (s == "uchar" || s == "uint8") t = Type::kU8;
  else if (s == "short" || s == "int16") t = Type::kI16;
  else if (s == "ushort" || s == "uint16") t = Type::kU16;
  else if (s == "int" || s == "int32") t = Type::kI32;
  else if (s == "uint" || s == "uint32") t = Type::kU32;
  else if (s == "float" || s == "float32") t = Type::kF32;
  else if (s == "double" || s == "float64") t = Type::kF64;
  else return false;
  return true;
}

inline std::size_t type_size(Type t) {
  switch (t) {
    case Type::kI8: case Type::kU8: return 1;
    case Type::kI16: case Type::kU16: return 2;
    case Type::kI32: case Type::kU32: case Type::kF32: return 4;
    case Type::kF64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Type type = Type::kF32;
  bool is_list = false;
  Type count_type = Type::kU8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

template <class T>
T read_raw(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorKind::kParse, path + ": unexpected end of binary data at offset " +
                                              std::to_string(static_cast<long long>(in.tellg())));
  return v;
}

inline double read_binary(std::istream& in, Type t, const std::string& path) {
  switch (t) {
    case Type::kI8: return read_raw<std::int8_t>(in, path);
    case Type::kU8: return read_raw<std::uint8_t>(in, path);
    case Type::kI16: return read_raw<std::int16_t>(in, path);
    case Type::kU16: return read_raw<std::uint16_t>(in, path);
    case Type::kI32: return read_raw<std::int32_t>(in, path);
    case Type::kU32: return read_raw<std::uint32_t>(in, path);
    case Type::kF32: return read_raw<float>(in, path);
    case Type::kF64: return read_raw<double>(in, path);
  }
  return 0.0;
}

}  // namespace ply_detail

inline PlyData read_ply(const std::filesystem::path& path) {
  using namespace ply_detail;
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + name);

  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw Error(ErrorKind::kParse, name + ":1: missing 'ply' magic");
  bool binary = false;
  std::vector<Element> elements;
  int line_no = 1;
  for (;;) {
    if (!std::getline(in, line)) throw Error(ErrorKind::kParse, name + ": header not terminated");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    const std::string where = name + ":" + std::to_string(line_no) + ": ";
    if (key == "end_header") break;
    if (key == "comment" || key == "obj_info" || key.empty()) continue;
    if (key == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw Error(ErrorKind::kParse, where + "unsupported format '" + fmt + "'");
    } else if (key == "element") {
      Element e;
      long long count = -1;
      ss >> e.name >> count;
      if (!ss || count < 0) throw Error(ErrorKind::kParse, where + "bad element line");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) throw Error(ErrorKind::kParse, where + "property before element");
      Property p;
      std::string t;
      ss >> t;
      if (t == "list") {
        std::string ct, vt;
        ss >> ct >> vt >> p.name;
        p.is_list = true;
        if (!parse_type(ct, p.count_type) || !parse_type(vt, p.type))
          throw Error(ErrorKind::kParse, where + "bad list property types");
      } else {
        ss >> p.name;
        if (!parse_type(t, p.type)) throw Error(ErrorKind::kParse, where + "unknown type '" + t + "'");
      }
      elements.back().props.push_back(p);
    } else {
      throw Error(ErrorKind::kParse, where + "unexpected header keyword '" + key + "'");
    }
  }

  PlyData out;
  std::size_t vertex_count = 0;
  for (const Element& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    auto find = [&](const char* n) -> int {
      for (std::size_t i = 0; i < e.props.size(); ++i)
        if (e.props[i].name == n) return static_cast<int>(i);
      return -1;
    };
    int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1, inx = -1, iny = -1, inz = -1;
    bool color_is_int = true;
    if (is_vertex) {
      ix = find("x"), iy = find("y"), iz = find("z");
      if (ix < 0 || iy < 0 || iz < 0) throw Error(ErrorKind::kParse, name + ": vertex element lacks x/y/z");
      ir = find("red"), ig = find("green"), ib = find("blue");
      inx = find("nx"), iny = find("ny"), inz = find("nz");
      if (ir >= 0) color_is_int = e.props[static_cast<std::size_t>(ir)].type != Type::kF32 &&
                                  e.props[static_cast<std::size_t>(ir)].type != Type::kF64;
      vertex_count = e.count;
    }
    std::vector<double> scalars(e.props.size());
    std::vector<double> list;
    for (std::size_t row = 0; row < e.count; ++row) {
      std::istringstream row_stream;
      std::istream* src = &in;
      if (!binary) {
        if (!std::getline(in, line))
          throw Error(ErrorKind::kParse, name + ": expected " + std::to_string(e.count) + " " + e.name +
                                             " rows, file ended at row " + std::to_string(row));
        ++line_no;
        row_stream.str(line);
        src = &row_stream;
      }
      auto read_value = [&](Type t) -> double {
        if (binary) return read_binary(*src, t, name);
        double v;
        if (!(*src >> v)) throw Error(ErrorKind::kParse, name + ":" + std::to_string(line_no) + ": bad number");
        return v;
      };
      for (std::size_t p = 0; p < e.props.size(); ++p) {
        const Property& prop = e.props[p];
        if (!prop.is_list) {
          scalars[p] = read_value(prop.type);
          continue;
        }
        const double n = read_value(prop.count_type);
        if (n < 0 || n != std::floor(n))
          throw Error(ErrorKind::kParse, name + ": bad list length in " + e.name + " row " + std::to_string(row));
        list.resize(static_cast<std::size_t>(n));
        for (auto& v : list) v = read_value(prop.type);
        if (is_face && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
          for (std::size_t k = 2; k < list.size(); ++k) {
            Triangle t{};
            const double idx[3] = {list[0], list[k - 1], list[k]};
            for (int c = 0; c < 3; ++c) {
              if (idx[c] < 0 || idx[c] >= static_cast<double>(vertex_count))
                throw Error(ErrorKind::kIndexOutOfRange, name + ": face " + std::to_string(row) + " references vertex " +
                                                             std::to_string(static_cast<long long>(idx[c])) +
                                                             " of " + std::to_string(vertex_count));
              t[static_cast<std::size_t>(c)] = static_cast<std::uint32_t>(idx[c]);
            }
            out.triangles.push_back(t);
          }
        }
      }
      if (is_vertex) {
        auto at = [&](int i) { return scalars[static_cast<std::size_t>(i)]; };
        out.cloud.positions.emplace_back(at(ix), at(iy), at(iz));
        if (ir >= 0 && ig >= 0 && ib >= 0) {
          const double s = color_is_int ? 1.0 / 255.0 : 1.0;
          out.cloud.colors.emplace_back(at(ir) * s, at(ig) * s, at(ib) * s);
        }
        if (inx >= 0 && iny >= 0 && inz >= 0) out.cloud.normals.emplace_back(at(inx), at(iny), at(inz));
      }
    }
  }
  return out;
}

inline std::uint8_t color_to_u8(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

/// Writes x,y,z (float) [,red,green,blue (uchar)] [,nx,ny,nz (float)].
inline void write_ply(const std::filesystem::path& path, const PointCloud& cloud, bool binary = true) {
  cloud.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_colors()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.has_normals()) out << "property float nx\nproperty float ny\nproperty float nz\n";
  out << "end_header\n";
  if (!binary) out << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto put_vec = [&](const Vec3& v) {
      for (int c = 0; c < 3; ++c) {
        const float f = static_cast<float>(v[c]);
        if (binary) out.write(reinterpret_cast<const char*>(&f), sizeof f);
        else out << (c == 0 ? "" : " ") << f;
      }
    };
    put_vec(cloud.positions[i]);
    if (cloud.has_colors()) {
      for (int c = 0; c < 3; ++c) {
        const std::uint8_t b = color_to_u8(cloud.colors[i][c]);
        if (binary) out.put(static_cast<char>(b));
        else out << " " << static_cast<int>(b);
      }
    }
    if (cloud.has_normals()) {
      if (!binary) out << " ";
      put_vec(cloud.normals[i]);
    }
    if (!binary) out << "\n";
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace eelabel
