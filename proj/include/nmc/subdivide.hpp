#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nmc/mesh.hpp"
#include "nmc/metrics.hpp"
#include "nmc/simplify.hpp"

namespace nmc {

/// Coarse mesh after `level` rounds of midpoint subdivision. Every vertex
/// remembers where it sits on the coarse surface.
struct SubdividedMesh {
  Mesh mesh;
  std::vector<SurfacePoint> provenance;  // per vertex, on the coarse mesh
  int level = 0;
  std::size_t coarse_vertices = 0;
  std::size_t coarse_faces = 0;
};

/// Splits every triangle into four, `levels` times. Coarse vertices keep their
/// indices; each level appends edge midpoints ordered by their parent edge key.
SubdividedMesh midpoint_subdivide(const Mesh& coarse, int levels);

/// Per-vertex inputs and targets with the one-ring stored in CSR form.
struct TrainingSet {
  std::vector<Vec3> positions;
  std::vector<Vec3> targets;
  std::vector<std::uint32_t> neighbor_offsets;  // size = vertices + 1
  std::vector<std::uint32_t> neighbors;
  std::vector<double> edge_lengths;  // aligned with `neighbors`

  std::size_t size() const { return positions.size(); }
  std::span<const std::uint32_t> neighbors_of(std::uint32_t i) const {
    return {neighbors.data() + neighbor_offsets[i], neighbors.data() + neighbor_offsets[i + 1]};
  }
  std::span<const double> edge_lengths_of(std::uint32_t i) const {
    return {edge_lengths.data() + neighbor_offsets[i], edge_lengths.data() + neighbor_offsets[i + 1]};
  }
};

/// Positions and one-ring of `mesh` with zero targets; the decoder's input set.
TrainingSet make_vertex_set(const Mesh& mesh);

/// Targets are f_SSP(provenance) - position. `sub` must come from the map's
/// coarse mesh (positions may be rounded, connectivity must match).
TrainingSet bake_training_set(const SubdividedMesh& sub, const SspMap& map);

/// Subdivided mesh with every vertex moved by its target displacement.
Mesh displaced_mesh(const SubdividedMesh& sub, const TrainingSet& set);

/// Quality of the exact-displacement reconstruction against the original: the
/// best any displacement network can do for this coarse mesh and level.
QualityReport ssp_gt_quality(const SubdividedMesh& sub, const TrainingSet& set, const Mesh& original,
                             const MetricOptions& options = {});

}  // namespace nmc
