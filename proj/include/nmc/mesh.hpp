#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace nmc {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Face = std::array<std::uint32_t, 3>;

/// Undirected edge, always stored with a < b.
struct EdgeKey {
  std::uint32_t a = 0;
  std::uint32_t b = 0;

  EdgeKey() = default;
  EdgeKey(std::uint32_t u, std::uint32_t v) : a(u < v ? u : v), b(u < v ? v : u) {}

  std::uint64_t packed() const { return (std::uint64_t{a} << 32) | b; }
  friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

/// Derived connectivity, rebuilt from the face list.
struct Adjacency {
  std::vector<EdgeKey> edges;                        // sorted, unique
  std::vector<std::vector<std::uint32_t>> neighbors;  // one-ring per vertex, sorted
  std::vector<std::vector<std::uint32_t>> vertex_faces;

  friend bool operator==(const Adjacency&, const Adjacency&) = default;
};

Adjacency build_adjacency(std::span<const Face> faces, std::size_t vertex_count);

/// Indexed triangle mesh. Immutable once constructed; indices are validated on
/// construction and adjacency is built eagerly.
class Mesh {
 public:
  Mesh() = default;
  /// Throws MeshError on out-of-range or repeated indices within a face.
  Mesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const Adjacency& adjacency() const { return adjacency_; }
  const std::vector<EdgeKey>& edges() const { return adjacency_.edges; }
  const std::vector<std::uint32_t>& neighbors(std::uint32_t v) const { return adjacency_.neighbors[v]; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_faces() const { return faces_.size(); }
  bool empty() const { return vertices_.empty(); }

  Vec3 corner(std::uint32_t face, int k) const { return vertices_[faces_[face][k]]; }
  /// Point at barycentric coordinates (w0, w1, w2) inside `face`.
  Vec3 point_on_face(std::uint32_t face, const Vec3& bary) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  Adjacency adjacency_;
};

struct BoundingBox {
  Vec3 min;
  Vec3 max;
  Vec3 extent() const { return max - min; }
};

BoundingBox bounding_box(const Mesh& mesh);

/// p' = (p + translation) * scale. The translation moves the bbox minimum
/// corner to the origin.
struct NormalizationTransform {
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p + translation) * scale; }
  Vec3 invert(const Vec3& q) const { return q / scale - translation; }
};

struct NormalizedMesh {
  Mesh mesh;
  NormalizationTransform transform;
};

/// Scales the mesh so the largest bbox dimension is 1 and its min corner sits at the origin.
NormalizedMesh normalize_unit_bbox(const Mesh& mesh);
Mesh apply_transform(const Mesh& mesh, const NormalizationTransform& t);
Mesh invert_transform(const Mesh& mesh, const NormalizationTransform& t);

struct ManifoldReport {
  bool is_edge_manifold = true;
  std::vector<EdgeKey> non_manifold_edges;  // shared by more than two faces
  std::vector<EdgeKey> boundary_edges;      // used by exactly one face
};

ManifoldReport validate_edge_manifold(const Mesh& mesh);

struct FaceGeometry {
  double area = 0.0;
  Vec3 normal = Vec3::Zero();  // zero when degenerate
  bool degenerate = false;
};

/// Right-hand-rule normal. Faces with area <= `degenerate_area` are flagged.
FaceGeometry face_area_and_normal(const Mesh& mesh, std::uint32_t face, double degenerate_area = 0.0);
FaceGeometry triangle_area_and_normal(const Vec3& a, const Vec3& b, const Vec3& c,
                                      double degenerate_area = 0.0);

/// Area below which a face of a normalized mesh is rejected at encode time.
inline constexpr double kDegenerateFaceArea = 1e-12;

std::vector<std::uint32_t> find_degenerate_faces(const Mesh& mesh, double degenerate_area = kDegenerateFaceArea);

/// Uncompressed size: 32*3v + 3f*log2(v) bits, log2 taken as a real number.
double raw_size_bits(std::size_t vertex_count, std::size_t face_count);
double raw_size_bits(const Mesh& mesh);
/// Bytes rounded up from a real bit count.
std::uint64_t bits_to_bytes(double bits);
inline constexpr double kBytesPerKB = 1024.0;

/// v - e + f
long euler_characteristic(const Mesh& mesh);
/// Connected components over face-edge connectivity (isolated vertices ignored).
std::size_t connected_components(const Mesh& mesh);

}  // namespace nmc
