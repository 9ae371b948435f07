#pragma once

#include <cstdint>
#include <vector>

#include "nmc/mesh.hpp"

namespace nmc {

enum class NormalPolicy {
  Face,    // geometric face normal (default)
  Smooth,  // area-weighted vertex normals, interpolated barycentrically
};

struct SampledPoint {
  Vec3 position;
  Vec3 normal;
  std::uint32_t face = 0;
  Vec3 bary;
};

/// Area-uniform samples: face drawn proportional to area, uniform barycentrics.
/// Deterministic for a given seed. Throws MeshError if the mesh has no area.
std::vector<SampledPoint> sample_surface(const Mesh& mesh, std::size_t count, std::uint64_t seed,
                                         NormalPolicy normals = NormalPolicy::Face);

struct ClosestHit {
  Vec3 point = Vec3::Zero();
  std::uint32_t face = 0;
  double distance = 0.0;
  Vec3 bary = Vec3::Zero();
};

/// Bounding-volume hierarchy over the triangles of a mesh. Queries are exact
/// and ties in distance go to the lower face index.
class SpatialIndex {
 public:
  explicit SpatialIndex(const Mesh& mesh);

  ClosestHit closest_point(const Vec3& q) const;
  const Mesh& mesh() const { return mesh_; }

 private:
  struct Node {
    Vec3 lo, hi;
    std::uint32_t first = 0;  // leaf: index into order_; inner: left child
    std::uint32_t count = 0;  // 0 for inner nodes
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids);

  Mesh mesh_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

/// Linear scan over every triangle; the oracle for SpatialIndex.
ClosestHit closest_point_brute_force(const Mesh& mesh, const Vec3& q);

/// Normal of `mesh` at a surface location under the given policy (zero if degenerate).
Vec3 surface_normal(const Mesh& mesh, std::uint32_t face, const Vec3& bary, NormalPolicy policy);

struct MetricOptions {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = default_thread_count()
  NormalPolicy normals = NormalPolicy::Face;
};

struct QualityReport {
  double d_pm = 0.0;  // d_a_to_b + d_b_to_a, normalized-mesh units
  double d_a_to_b = 0.0;
  double d_b_to_a = 0.0;
  double d_norm = 0.0;  // degrees, mean over both directions
  double d_norm_a_to_b = 0.0;
  double d_norm_b_to_a = 0.0;
  std::size_t samples = 0;  // per direction
  std::size_t excluded_normals = 0;
};

/// Symmetric point-to-mesh distance and normal error. Samples on `a` use
/// `seed`, samples on `b` use `seed + 1`; both metrics share the same pairs.
QualityReport evaluate_quality(const Mesh& a, const Mesh& b, const MetricOptions& options = {});

double d_pm(const Mesh& a, const Mesh& b, const MetricOptions& options = {});
double d_norm(const Mesh& a, const Mesh& b, const MetricOptions& options = {});

/// NMC_THREADS if set, else hardware concurrency (at least 1).
unsigned default_thread_count();

}  // namespace nmc
