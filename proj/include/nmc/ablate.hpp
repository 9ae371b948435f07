#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nmc/metrics.hpp"
#include "nmc/simplify.hpp"

namespace nmc {

struct AblationCell {
  std::size_t target_coarse_vertices = 0;
  int levels = 0;
  std::size_t coarse_vertices = 0;  // realized
  std::size_t subdivided_vertices = 0;
  std::size_t subdivided_faces = 0;
  double d_pm = 0.0;
  double d_norm = 0.0;
  std::string error;  // non-empty if this cell failed
};

/// Exact-displacement reconstruction quality over a grid of coarse sizes and
/// subdivision levels. The mesh is normalized first; each coarse size is
/// decimated once. A failing cell records its error and the grid continues.
std::vector<AblationCell> ablate_remesh(const Mesh& mesh, const std::vector<std::size_t>& coarse_sizes,
                                        const std::vector<int>& levels, const MetricOptions& metrics = {},
                                        const DecimateOptions& decimate = {});

/// coarse_target,levels,coarse_vertices,subdivided_vertices,subdivided_faces,d_pm,d_norm,error
void write_ablation_csv(std::ostream& out, const std::vector<AblationCell>& cells);

}  // namespace nmc
