#include "nmc/subdivide.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "nmc/error.hpp"
#include "parallel.hpp"

namespace nmc {
namespace {

constexpr double kCoarseMismatch = 1e-5;

using CornerBary = std::array<Vec3, 3>;

}  // namespace

SubdividedMesh midpoint_subdivide(const Mesh& coarse, int levels) {
  if (levels < 0) throw MeshError("subdivision level must be non-negative");
  SubdividedMesh out;
  out.level = levels;
  out.coarse_vertices = coarse.num_vertices();
  out.coarse_faces = coarse.num_faces();

  std::vector<Vec3> verts = coarse.vertices();
  std::vector<Face> faces = coarse.faces();
  std::vector<std::uint32_t> ancestor(faces.size());
  std::vector<CornerBary> corners(faces.size(), CornerBary{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()});
  std::vector<SurfacePoint> provenance(verts.size());
  std::vector<bool> seen(verts.size(), false);
  for (std::uint32_t f = 0; f < faces.size(); ++f) {
    ancestor[f] = f;
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t v = faces[f][k];
      if (!seen[v]) {
        seen[v] = true;
        provenance[v] = {f, corners[f][k]};
      }
    }
  }

  for (int level = 0; level < levels; ++level) {
    std::vector<EdgeKey> edges;
    edges.reserve(faces.size() * 3);
    for (const Face& t : faces) {
      for (int k = 0; k < 3; ++k) edges.emplace_back(t[k], t[(k + 1) % 3]);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    const auto base = static_cast<std::uint32_t>(verts.size());
    verts.reserve(base + edges.size());
    for (const EdgeKey& e : edges) verts.push_back(0.5 * (verts[e.a] + verts[e.b]));
    provenance.resize(verts.size());
    seen.resize(verts.size(), false);

    auto midpoint = [&](std::uint32_t u, std::uint32_t v) {
      const EdgeKey key(u, v);
      return base + static_cast<std::uint32_t>(std::lower_bound(edges.begin(), edges.end(), key) - edges.begin());
    };

    std::vector<Face> next_faces;
    std::vector<std::uint32_t> next_ancestor;
    std::vector<CornerBary> next_corners;
    next_faces.reserve(faces.size() * 4);
    next_ancestor.reserve(faces.size() * 4);
    next_corners.reserve(faces.size() * 4);
    for (std::uint32_t f = 0; f < faces.size(); ++f) {
      const auto [a, b, c] = faces[f];
      const std::uint32_t mab = midpoint(a, b), mbc = midpoint(b, c), mca = midpoint(c, a);
      const CornerBary& w = corners[f];
      const Vec3 wab = 0.5 * (w[0] + w[1]), wbc = 0.5 * (w[1] + w[2]), wca = 0.5 * (w[2] + w[0]);
      const std::array<std::pair<std::uint32_t, Vec3>, 3> mids{{{mab, wab}, {mbc, wbc}, {mca, wca}}};
      for (const auto& [m, bary] : mids) {
        if (!seen[m]) {
          seen[m] = true;
          provenance[m] = {ancestor[f], bary};
        }
      }
      next_faces.push_back({a, mab, mca});
      next_corners.push_back({w[0], wab, wca});
      next_faces.push_back({mab, b, mbc});
      next_corners.push_back({wab, w[1], wbc});
      next_faces.push_back({mca, mbc, c});
      next_corners.push_back({wca, wbc, w[2]});
      next_faces.push_back({mab, mbc, mca});
      next_corners.push_back({wab, wbc, wca});
      next_ancestor.insert(next_ancestor.end(), 4, ancestor[f]);
    }
    faces = std::move(next_faces);
    ancestor = std::move(next_ancestor);
    corners = std::move(next_corners);
  }

  out.mesh = Mesh(std::move(verts), std::move(faces));
  out.provenance = std::move(provenance);
  return out;
}

namespace {

TrainingSet vertex_set(const Mesh& mesh) {
  TrainingSet set;
  set.positions = mesh.vertices();
  set.targets.assign(mesh.num_vertices(), Vec3::Zero());
  set.neighbor_offsets.reserve(mesh.num_vertices() + 1);
  set.neighbor_offsets.push_back(0);
  for (std::uint32_t i = 0; i < mesh.num_vertices(); ++i) {
    for (std::uint32_t j : mesh.neighbors(i)) {
      set.neighbors.push_back(j);
      set.edge_lengths.push_back((set.positions[i] - set.positions[j]).norm());
    }
    set.neighbor_offsets.push_back(static_cast<std::uint32_t>(set.neighbors.size()));
  }
  return set;
}

}  // namespace

TrainingSet make_vertex_set(const Mesh& mesh) { return vertex_set(mesh); }

TrainingSet bake_training_set(const SubdividedMesh& sub, const SspMap& map) {
  const Mesh& coarse = map.coarse();
  if (sub.coarse_vertices != coarse.num_vertices() || sub.coarse_faces != coarse.num_faces()) {
    throw MeshError("subdivided mesh was not built from the map's coarse mesh (size mismatch)");
  }
  if (sub.provenance.size() != sub.mesh.num_vertices()) throw MeshError("subdivided mesh has no provenance");
  for (std::uint32_t f = 0; f < sub.coarse_faces; ++f) {
    // Level-0 faces are the first face of every group of 4^s children.
    const std::size_t child = static_cast<std::size_t>(f) << (2 * sub.level);
    if (sub.mesh.faces()[child][0] != coarse.faces()[f][0]) {
      throw MeshError("subdivided mesh connectivity does not match the map's coarse mesh at face " +
                      std::to_string(f));
    }
  }
  for (std::uint32_t v = 0; v < sub.coarse_vertices; ++v) {
    if ((sub.mesh.vertices()[v] - coarse.vertices()[v]).lpNorm<Eigen::Infinity>() > kCoarseMismatch) {
      throw MeshError("coarse vertex " + std::to_string(v) + " differs from the map's coarse mesh");
    }
  }

  TrainingSet set = vertex_set(sub.mesh);
  detail::parallel_for(set.size(), 0, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      set.targets[i] = map.map_point(sub.provenance[i]) - set.positions[i];
    }
  });
  return set;
}

Mesh displaced_mesh(const SubdividedMesh& sub, const TrainingSet& set) {
  std::vector<Vec3> verts(set.size());
  for (std::size_t i = 0; i < verts.size(); ++i) verts[i] = set.positions[i] + set.targets[i];
  return Mesh(std::move(verts), sub.mesh.faces());
}

QualityReport ssp_gt_quality(const SubdividedMesh& sub, const TrainingSet& set, const Mesh& original,
                             const MetricOptions& options) {
  return evaluate_quality(original, displaced_mesh(sub, set), options);
}

}  // namespace nmc
