#include "nmc/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "nmc/error.hpp"

namespace nmc {
namespace {

static_assert(std::endian::native == std::endian::little, "binary PLY IO assumes a little-endian host");

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// OBJ index: 1-based, negative values are relative to the current vertex count.
std::uint32_t resolve_obj_index(const std::string& token, std::size_t vertex_count, std::size_t line) {
  const std::string head = token.substr(0, token.find('/'));
  long long idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoll(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw MeshError("OBJ line " + std::to_string(line) + ": bad face index '" + token + "'");
  }
  if (idx == 0) throw MeshError("OBJ line " + std::to_string(line) + ": face index 0 (OBJ indices are 1-based)");
  const long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(vertex_count) + idx;
  if (resolved < 0 || resolved >= static_cast<long long>(vertex_count)) {
    throw MeshError("OBJ line " + std::to_string(line) + ": face index " + std::to_string(idx) + " out of range");
  }
  return static_cast<std::uint32_t>(resolved);
}

void append_polygon(const std::vector<std::uint32_t>& poly, bool triangulate, std::vector<Face>& faces,
                    const std::string& where) {
  if (poly.size() < 3) throw MeshError(where + ": face with fewer than 3 vertices");
  if (poly.size() > 3 && !triangulate) {
    throw MeshError(where + ": " + std::to_string(poly.size()) + "-gon found; enable triangulation to accept polygons");
  }
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
}

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType parse_ply_type(const std::string& name) {
  const std::string n = lowercase(name);
  if (n == "char" || n == "int8") return PlyType::Int8;
  if (n == "uchar" || n == "uint8") return PlyType::UInt8;
  if (n == "short" || n == "int16") return PlyType::Int16;
  if (n == "ushort" || n == "uint16") return PlyType::UInt16;
  if (n == "int" || n == "int32") return PlyType::Int32;
  if (n == "uint" || n == "uint32") return PlyType::UInt32;
  if (n == "float" || n == "float32") return PlyType::Float32;
  if (n == "double" || n == "float64") return PlyType::Float64;
  throw MeshError("PLY: unknown property type '" + name + "'");
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

template <typename T>
T read_raw(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw MeshError("PLY: unexpected end of binary data");
  return value;
}

double read_binary_scalar(std::istream& in, PlyType t) {
  switch (t) {
    case PlyType::Int8: return read_raw<std::int8_t>(in);
    case PlyType::UInt8: return read_raw<std::uint8_t>(in);
    case PlyType::Int16: return read_raw<std::int16_t>(in);
    case PlyType::UInt16: return read_raw<std::uint16_t>(in);
    case PlyType::Int32: return read_raw<std::int32_t>(in);
    case PlyType::UInt32: return read_raw<std::uint32_t>(in);
    case PlyType::Float32: return read_raw<float>(in);
    case PlyType::Float64: return read_raw<double>(in);
  }
  return 0.0;
}

double read_ascii_scalar(std::istream& in) {
  double v;
  if (!(in >> v)) throw MeshError("PLY: malformed ASCII value");
  return v;
}

std::uint32_t to_index(double value, std::size_t vertex_count) {
  if (value < 0 || value >= static_cast<double>(vertex_count) || value != std::floor(value)) {
    throw MeshError("PLY: face index " + std::to_string(value) + " out of range");
  }
  return static_cast<std::uint32_t>(value);
}

}  // namespace

LoadResult read_obj(std::istream& in, const LoadOptions& options) {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<std::string> warnings;
  bool saw_uv = false, saw_normals = false, saw_colors = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw MeshError("OBJ line " + std::to_string(line_no) + ": malformed vertex");
      double extra;
      if (ls >> extra) saw_colors = true;
      vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string token;
      while (ls >> token) poly.push_back(resolve_obj_index(token, vertices.size(), line_no));
      append_polygon(poly, options.triangulate, faces, "OBJ line " + std::to_string(line_no));
    } else if (tag == "vt") {
      saw_uv = true;
    } else if (tag == "vn") {
      saw_normals = true;
    }
  }
  if (saw_uv) warnings.emplace_back("OBJ: texture coordinates dropped");
  if (saw_normals) warnings.emplace_back("OBJ: vertex normals dropped");
  if (saw_colors) warnings.emplace_back("OBJ: per-vertex colors dropped");
  return {Mesh(std::move(vertices), std::move(faces)), std::move(warnings)};
}

LoadResult read_ply(std::istream& in, const LoadOptions& options) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw MeshError("PLY: missing 'ply' magic");
  bool binary = false;
  std::vector<PlyElement> elements;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw MeshError("PLY: unsupported format '" + fmt + "'");
      }
    } else if (tag == "element") {
      PlyElement e;
      if (!(ls >> e.name >> e.count)) throw MeshError("PLY: malformed element line");
      elements.push_back(std::move(e));
    } else if (tag == "property") {
      if (elements.empty()) throw MeshError("PLY: property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(count_type);
        p.type = parse_ply_type(item_type);
      } else {
        p.type = parse_ply_type(type);
        ls >> p.name;
      }
      elements.back().properties.push_back(std::move(p));
    } else if (tag == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw MeshError("PLY: header not terminated");

  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<std::string> warnings;
  std::size_t vertex_count = 0;

  auto read_scalar = [&](PlyType t) { return binary ? read_binary_scalar(in, t) : read_ascii_scalar(in); };

  for (const PlyElement& e : elements) {
    if (e.name == "vertex") {
      int ix = -1, iy = -1, iz = -1;
      for (int k = 0; k < static_cast<int>(e.properties.size()); ++k) {
        const std::string& n = e.properties[k].name;
        if (n == "x") ix = k;
        if (n == "y") iy = k;
        if (n == "z") iz = k;
      }
      if (ix < 0 || iy < 0 || iz < 0) throw MeshError("PLY: vertex element lacks x/y/z");
      if (e.properties.size() > 3) warnings.emplace_back("PLY: non-position vertex attributes dropped");
      vertices.reserve(e.count);
      std::vector<double> row(e.properties.size());
      for (std::size_t i = 0; i < e.count; ++i) {
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const PlyProperty& p = e.properties[k];
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(read_scalar(p.count_type));
            for (std::size_t j = 0; j < n; ++j) read_scalar(p.type);
            row[k] = 0;
          } else {
            row[k] = read_scalar(p.type);
          }
        }
        vertices.emplace_back(row[ix], row[iy], row[iz]);
      }
      vertex_count = vertices.size();
    } else if (e.name == "face") {
      int list_prop = -1;
      for (int k = 0; k < static_cast<int>(e.properties.size()); ++k) {
        const PlyProperty& p = e.properties[k];
        if (p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index")) list_prop = k;
      }
      if (list_prop < 0) throw MeshError("PLY: face element lacks vertex_indices");
      if (e.properties.size() > 1) warnings.emplace_back("PLY: non-index face attributes dropped");
      faces.reserve(e.count);
      std::vector<std::uint32_t> poly;
      for (std::size_t i = 0; i < e.count; ++i) {
        for (int k = 0; k < static_cast<int>(e.properties.size()); ++k) {
          const PlyProperty& p = e.properties[k];
          if (!p.is_list) {
            read_scalar(p.type);
            continue;
          }
          const auto n = static_cast<std::size_t>(read_scalar(p.count_type));
          poly.clear();
          for (std::size_t j = 0; j < n; ++j) {
            const double idx = read_scalar(p.type);
            if (k == list_prop) poly.push_back(to_index(idx, vertex_count));
          }
          if (k == list_prop) append_polygon(poly, options.triangulate, faces, "PLY face " + std::to_string(i));
        }
      }
    } else {
      for (std::size_t i = 0; i < e.count; ++i) {
        for (const PlyProperty& p : e.properties) {
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(read_scalar(p.count_type));
            for (std::size_t j = 0; j < n; ++j) read_scalar(p.type);
          } else {
            read_scalar(p.type);
          }
        }
      }
    }
  }
  return {Mesh(std::move(vertices), std::move(faces)), std::move(warnings)};
}

LoadResult load_mesh_with_warnings(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshError("cannot open mesh file '" + path.string() + "'");
  const std::string ext = lowercase(path.extension().string());
  if (ext == ".obj") return read_obj(in, options);
  if (ext == ".ply") return read_ply(in, options);
  throw MeshError("unsupported mesh extension '" + ext + "' (expected .obj or .ply)");
}

Mesh load_mesh(const std::filesystem::path& path, const LoadOptions& options) {
  return load_mesh_with_warnings(path, options).mesh;
}

void write_obj(std::ostream& out, const Mesh& mesh) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const Vec3& p : mesh.vertices()) out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const Face& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void write_ply(std::ostream& out, const Mesh& mesh, bool binary) {
  out << "ply\n"
      << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << mesh.num_vertices() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.num_faces() << '\n'
      << "property list uchar uint vertex_indices\n"
      << "end_header\n";
  if (binary) {
    for (const Vec3& p : mesh.vertices()) out.write(reinterpret_cast<const char*>(p.data()), 3 * sizeof(double));
    for (const Face& f : mesh.faces()) {
      const std::uint8_t three = 3;
      out.write(reinterpret_cast<const char*>(&three), 1);
      out.write(reinterpret_cast<const char*>(f.data()), 3 * sizeof(std::uint32_t));
    }
  } else {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const Vec3& p : mesh.vertices()) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    for (const Face& f : mesh.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  }
}

MeshFormat format_for_path(const std::filesystem::path& path) {
  return lowercase(path.extension().string()) == ".obj" ? MeshFormat::Obj : MeshFormat::PlyBinaryLE;
}

void save_mesh(const std::filesystem::path& path, const Mesh& mesh, MeshFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MeshError("cannot write mesh file '" + path.string() + "'");
  switch (format) {
    case MeshFormat::Obj: write_obj(out, mesh); break;
    case MeshFormat::PlyAscii: write_ply(out, mesh, false); break;
    case MeshFormat::PlyBinaryLE: write_ply(out, mesh, true); break;
  }
  if (!out) throw MeshError("failed writing mesh file '" + path.string() + "'");
}

}  // namespace nmc
