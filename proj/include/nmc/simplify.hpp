#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nmc/mesh.hpp"

namespace nmc {

/// A point on a mesh surface: face index plus barycentric weights of its corners.
struct SurfacePoint {
  std::uint32_t face = 0;
  Vec3 bary = Vec3(1.0 / 3, 1.0 / 3, 1.0 / 3);
};

/// Garland-Heckbert error quadric (symmetric 4x4).
struct Quadric {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();

  /// Plane n.x + d = 0 with unit n.
  static Quadric from_plane(const Vec3& n, double d);
  double error(const Vec3& p) const;
  Quadric& operator+=(const Quadric& o) {
    m += o.m;
    return *this;
  }
  friend Quadric operator+(Quadric a, const Quadric& b) { return a += b; }
};

/// One triangle of a collapse chart. `vertices` is the face's corner order in the
/// working mesh; `uv[k]` is the chart position of `vertices[k]`.
struct ChartTriangle {
  std::uint32_t face_id = 0;
  Face vertices{};
  std::array<Vec2, 3> uv{};
};

/// The pre- and post-collapse parameterizations of one edge collapse. Both
/// charts tile the same fixed boundary polygon.
struct CollapseRecord {
  std::uint32_t kept = 0;
  std::uint32_t removed = 0;
  Vec3 new_position = Vec3::Zero();
  std::vector<std::uint32_t> boundary;  // patch boundary loop, counter-clockwise
  std::vector<Vec2> boundary_uv;
  std::vector<ChartTriangle> before;
  std::vector<ChartTriangle> after;
};

enum class CollapseRejection {
  None,
  BoundaryEdge,           // boundary edges are never collapsed
  BoundaryEndpoints,      // interior edge joining two boundary vertices would pinch the surface
  NotDisk,                // the edge's one-ring is not a topological disk
  FlippedUv,              // no injective chart found
  Fold,                   // a 3D triangle would flip or degenerate
};

const char* to_string(CollapseRejection r);

struct ChartResult {
  std::optional<CollapseRecord> record;
  CollapseRejection reason = CollapseRejection::None;
};

/// Flattens the one-ring of `edge` in `mesh` and re-parameterizes the collapsed
/// patch into the same boundary. The endpoint on the mesh boundary (if any) is
/// kept, otherwise `edge.a`. Pre-collapse chart faces carry their mesh face index;
/// post-collapse faces are numbered from mesh.num_faces().
ChartResult flatten_collapse_neighborhood(const Mesh& mesh, EdgeKey edge, const Vec3& new_position);

/// Composed map from the coarse surface back onto the original surface.
class SspMap {
 public:
  SspMap() = default;
  /// `coarse_face_ids[i]` is the working face id of coarse face i. Ids below
  /// original->num_faces() denote untouched original faces; larger ids are
  /// created by records in order.
  SspMap(std::shared_ptr<const Mesh> original, std::shared_ptr<const Mesh> coarse,
         std::vector<CollapseRecord> records, std::vector<std::uint32_t> coarse_face_ids);

  /// Map over zero collapses; `coarse` must share the original's face list
  /// (positions may differ).
  static SspMap identity(std::shared_ptr<const Mesh> original, std::shared_ptr<const Mesh> coarse);

  const Mesh& original() const { return *original_; }
  const Mesh& coarse() const { return *coarse_; }
  const std::vector<CollapseRecord>& records() const { return records_; }
  std::uint32_t coarse_face_id(std::uint32_t coarse_face) const { return coarse_face_ids_[coarse_face]; }

  /// Follows the collapse history of p's face back to an original face.
  SurfacePoint trace(const SurfacePoint& p) const;
  /// Reference implementation that visits every record in reverse order.
  SurfacePoint trace_iterated(const SurfacePoint& p) const;

  Vec3 map_point(const SurfacePoint& p) const;
  /// f_SSP(p) - p
  Vec3 displacement(const SurfacePoint& p) const;

 private:
  SurfacePoint step_back(const CollapseRecord& record, std::uint32_t local, const Vec3& bary) const;

  struct FaceOrigin {
    std::uint32_t record = 0;
    std::uint32_t local = 0;
  };

  std::shared_ptr<const Mesh> original_;
  std::shared_ptr<const Mesh> coarse_;
  std::vector<CollapseRecord> records_;
  std::vector<std::uint32_t> coarse_face_ids_;
  std::vector<FaceOrigin> created_;  // indexed by face id - original face count
};

struct DecimateOptions {
  /// Minimum cosine between a face normal before and after a collapse.
  double min_normal_cosine = 0.2;
  /// Rejected candidates are re-queued with cost * penalty, then frozen after `max_rejections`.
  double rejection_penalty = 10.0;
  int max_rejections = 3;
};

struct DecimationResult {
  Mesh coarse;
  SspMap map;
  std::size_t collapses = 0;
  std::size_t rejections = 0;
  bool reached_target = false;
  std::vector<std::string> warnings;
};

/// QSLIM edge collapse down to `target_vertices`, recording a chart pair for
/// every collapse. Throws MeshError on non-manifold input.
DecimationResult qslim_decimate_with_ssp(const Mesh& mesh, std::size_t target_vertices,
                                         const DecimateOptions& options = {});

/// Text dump of the collapse records (diagnostics only).
void write_collapse_log(std::ostream& out, const SspMap& map);

}  // namespace nmc
