#include "nmc/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "nmc/error.hpp"

namespace nmc {

Adjacency build_adjacency(std::span<const Face> faces, std::size_t vertex_count) {
  Adjacency adj;
  adj.neighbors.resize(vertex_count);
  adj.vertex_faces.resize(vertex_count);
  adj.edges.reserve(faces.size() * 3);
  for (std::uint32_t f = 0; f < faces.size(); ++f) {
    const Face& t = faces[f];
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t u = t[k];
      const std::uint32_t v = t[(k + 1) % 3];
      adj.edges.emplace_back(u, v);
      adj.neighbors[u].push_back(v);
      adj.neighbors[v].push_back(u);
      adj.vertex_faces[u].push_back(f);
    }
  }
  std::sort(adj.edges.begin(), adj.edges.end());
  adj.edges.erase(std::unique(adj.edges.begin(), adj.edges.end()), adj.edges.end());
  for (auto& n : adj.neighbors) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return adj;
}

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const std::size_t n = vertices_.size();
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& t = faces_[f];
    for (std::uint32_t idx : t) {
      if (idx >= n) {
        throw MeshError("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                        " but mesh has " + std::to_string(n) + " vertices");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw MeshError("face " + std::to_string(f) + " repeats a vertex index");
    }
  }
  adjacency_ = build_adjacency(faces_, n);
}

Vec3 Mesh::point_on_face(std::uint32_t face, const Vec3& bary) const {
  const Face& t = faces_[face];
  return bary[0] * vertices_[t[0]] + bary[1] * vertices_[t[1]] + bary[2] * vertices_[t[2]];
}

BoundingBox bounding_box(const Mesh& mesh) {
  BoundingBox box{Vec3::Constant(INFINITY), Vec3::Constant(-INFINITY)};
  for (const Vec3& p : mesh.vertices()) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

NormalizedMesh normalize_unit_bbox(const Mesh& mesh) {
  if (mesh.empty()) throw MeshError("cannot normalize an empty mesh");
  const BoundingBox box = bounding_box(mesh);
  const double largest = box.extent().maxCoeff();
  if (!(largest > 0.0) || !std::isfinite(largest)) {
    throw MeshError("cannot normalize a mesh with zero extent");
  }
  NormalizationTransform t{-box.min, 1.0 / largest};
  return {apply_transform(mesh, t), t};
}

Mesh apply_transform(const Mesh& mesh, const NormalizationTransform& t) {
  std::vector<Vec3> v;
  v.reserve(mesh.num_vertices());
  for (const Vec3& p : mesh.vertices()) v.push_back(t.apply(p));
  return Mesh(std::move(v), mesh.faces());
}

Mesh invert_transform(const Mesh& mesh, const NormalizationTransform& t) {
  std::vector<Vec3> v;
  v.reserve(mesh.num_vertices());
  for (const Vec3& p : mesh.vertices()) v.push_back(t.invert(p));
  return Mesh(std::move(v), mesh.faces());
}

ManifoldReport validate_edge_manifold(const Mesh& mesh) {
  std::unordered_map<std::uint64_t, int> uses;
  uses.reserve(mesh.num_faces() * 2);
  for (const Face& t : mesh.faces()) {
    for (int k = 0; k < 3; ++k) ++uses[EdgeKey(t[k], t[(k + 1) % 3]).packed()];
  }
  ManifoldReport report;
  for (const EdgeKey& e : mesh.edges()) {
    const int count = uses[e.packed()];
    if (count > 2) report.non_manifold_edges.push_back(e);
    if (count == 1) report.boundary_edges.push_back(e);
  }
  report.is_edge_manifold = report.non_manifold_edges.empty();
  return report;
}

FaceGeometry triangle_area_and_normal(const Vec3& a, const Vec3& b, const Vec3& c, double degenerate_area) {
  const Vec3 cross = (b - a).cross(c - a);
  const double len = cross.norm();
  FaceGeometry g;
  g.area = 0.5 * len;
  if (len == 0.0 || g.area <= degenerate_area) {
    g.degenerate = true;
    return g;
  }
  g.normal = cross / len;
  return g;
}

FaceGeometry face_area_and_normal(const Mesh& mesh, std::uint32_t face, double degenerate_area) {
  return triangle_area_and_normal(mesh.corner(face, 0), mesh.corner(face, 1), mesh.corner(face, 2),
                                  degenerate_area);
}

std::vector<std::uint32_t> find_degenerate_faces(const Mesh& mesh, double degenerate_area) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t f = 0; f < mesh.num_faces(); ++f) {
    if (face_area_and_normal(mesh, f, degenerate_area).degenerate) out.push_back(f);
  }
  return out;
}

double raw_size_bits(std::size_t vertex_count, std::size_t face_count) {
  const double v = static_cast<double>(vertex_count);
  const double log_v = vertex_count > 0 ? std::log2(v) : 0.0;
  return 32.0 * 3.0 * v + 3.0 * static_cast<double>(face_count) * log_v;
}

double raw_size_bits(const Mesh& mesh) { return raw_size_bits(mesh.num_vertices(), mesh.num_faces()); }

std::uint64_t bits_to_bytes(double bits) { return static_cast<std::uint64_t>(std::ceil(bits / 8.0)); }

long euler_characteristic(const Mesh& mesh) {
  return static_cast<long>(mesh.num_vertices()) - static_cast<long>(mesh.edges().size()) +
         static_cast<long>(mesh.num_faces());
}

std::size_t connected_components(const Mesh& mesh) {
  std::vector<std::uint32_t> parent(mesh.num_vertices());
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Face& t : mesh.faces()) {
    parent[find(t[1])] = find(t[0]);
    parent[find(t[2])] = find(t[0]);
  }
  std::size_t count = 0;
  for (std::uint32_t v = 0; v < mesh.num_vertices(); ++v) {
    if (!mesh.adjacency().vertex_faces[v].empty() && find(v) == v) ++count;
  }
  return count;
}

}  // namespace nmc
