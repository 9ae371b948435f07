#include "nmc/ablate.hpp"

#include <ostream>

#include "nmc/subdivide.hpp"

namespace nmc {

std::vector<AblationCell> ablate_remesh(const Mesh& mesh, const std::vector<std::size_t>& coarse_sizes,
                                        const std::vector<int>& levels, const MetricOptions& metrics,
                                        const DecimateOptions& decimate) {
  const Mesh normalized = normalize_unit_bbox(mesh).mesh;
  std::vector<AblationCell> cells;
  for (std::size_t target : coarse_sizes) {
    DecimationResult dec;
    std::string failure;
    try {
      dec = qslim_decimate_with_ssp(normalized, target, decimate);
    } catch (const std::exception& e) {
      failure = e.what();
    }
    for (int s : levels) {
      AblationCell cell;
      cell.target_coarse_vertices = target;
      cell.levels = s;
      if (!failure.empty()) {
        cell.error = failure;
        cells.push_back(cell);
        continue;
      }
      try {
        cell.coarse_vertices = dec.coarse.num_vertices();
        const SubdividedMesh sub = midpoint_subdivide(dec.coarse, s);
        const TrainingSet set = bake_training_set(sub, dec.map);
        const QualityReport q = ssp_gt_quality(sub, set, normalized, metrics);
        cell.subdivided_vertices = sub.mesh.num_vertices();
        cell.subdivided_faces = sub.mesh.num_faces();
        cell.d_pm = q.d_pm;
        cell.d_norm = q.d_norm;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationCell>& cells) {
  out << "coarse_target,levels,coarse_vertices,subdivided_vertices,subdivided_faces,d_pm,d_norm,error\n";
  const auto old = out.precision(8);
  for (const AblationCell& c : cells) {
    std::string err = c.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n') ch = ' ';
    }
    out << c.target_coarse_vertices << ',' << c.levels << ',' << c.coarse_vertices << ',' << c.subdivided_vertices << ','
        << c.subdivided_faces << ',' << c.d_pm << ',' << c.d_norm << ',' << err << '\n';
  }
  out.precision(old);
}

}  // namespace nmc
