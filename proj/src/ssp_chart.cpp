#include "ssp_chart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <unordered_map>

#include <Eigen/Dense>

#include "nmc/geometry.hpp"
#include "nmc/mesh.hpp"

namespace nmc::detail {
namespace {

// Chart triangles thinner than this fraction of the polygon area count as flipped.
constexpr double kMinRelativeUvArea = 1e-10;

using PositionMap = std::unordered_map<std::uint32_t, Vec3>;
using UvMap = std::unordered_map<std::uint32_t, Vec2>;

double angle_at(const Vec3& x, const Vec3& y, const Vec3& z) {
  const Vec3 e1 = y - x, e2 = z - x;
  return std::atan2(e1.cross(e2).norm(), e1.dot(e2));
}

// Solves sum_j w_ij (u_i - u_j) = 0 for the interior vertices; boundary uv are fixed.
bool solve_interior(const std::vector<Face>& tris, const PositionMap& pos, const std::vector<std::uint32_t>& interior,
                    ChartWeights kind, UvMap& uv) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> w;
  for (const Face& t : tris) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t x = t[k], y = t[(k + 1) % 3], z = t[(k + 2) % 3];
      const Vec3& px = pos.at(x);
      const Vec3& py = pos.at(y);
      const Vec3& pz = pos.at(z);
      const double theta = angle_at(px, py, pz);
      if (!(theta > 0.0) || !(theta < std::numbers::pi)) return false;
      if (kind == ChartWeights::Cotangent) {
        const double half_cot = 0.5 / std::tan(theta);
        w[{y, z}] += half_cot;
        w[{z, y}] += half_cot;
      } else {
        const double t_half = std::tan(0.5 * theta);
        const double ly = (py - px).norm(), lz = (pz - px).norm();
        if (ly == 0.0 || lz == 0.0) return false;
        w[{x, y}] += t_half / ly;
        w[{x, z}] += t_half / lz;
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(interior.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::uint32_t i = interior[r];
    for (auto it = w.lower_bound({i, 0}); it != w.end() && it->first.first == i; ++it) {
      const std::uint32_t j = it->first.second;
      const double wij = it->second;
      a(r, r) += wij;
      const auto col = std::find(interior.begin(), interior.end(), j);
      if (col != interior.end()) {
        a(r, col - interior.begin()) -= wij;
      } else {
        rhs.row(r) += wij * uv.at(j).transpose();
      }
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) return false;
  const Eigen::MatrixXd x = lu.solve(rhs);
  if (!x.allFinite()) return false;
  for (Eigen::Index r = 0; r < n; ++r) uv[interior[r]] = x.row(r).transpose();
  return true;
}

bool chart_is_injective(const std::vector<Face>& tris, const UvMap& uv, double polygon_area) {
  for (const Face& t : tris) {
    if (signed_area_2d(uv.at(t[0]), uv.at(t[1]), uv.at(t[2])) <= kMinRelativeUvArea * polygon_area) return false;
  }
  return true;
}

// Harmonic solve with cotangent weights; mean-value weights as the fallback,
// since their positivity makes the convex-boundary chart injective.
bool parameterize(const std::vector<Face>& tris, const PositionMap& pos, const std::vector<std::uint32_t>& interior,
                  double polygon_area, UvMap& uv) {
  if (interior.empty()) return chart_is_injective(tris, uv, polygon_area);
  for (ChartWeights kind : {ChartWeights::Cotangent, ChartWeights::MeanValue}) {
    if (solve_interior(tris, pos, interior, kind, uv) && chart_is_injective(tris, uv, polygon_area)) return true;
  }
  return false;
}

std::vector<ChartTriangle> make_chart(const std::vector<Face>& tris, const std::vector<std::uint32_t>& ids,
                                      const UvMap& uv) {
  std::vector<ChartTriangle> out;
  out.reserve(tris.size());
  for (std::size_t k = 0; k < tris.size(); ++k) {
    out.push_back({ids[k], tris[k], {uv.at(tris[k][0]), uv.at(tris[k][1]), uv.at(tris[k][2])}});
  }
  return out;
}

ChartResult reject(CollapseRejection r) { return {std::nullopt, r}; }

// Chart location of the point of the pre-collapse patch closest to `p`.
Vec2 project_to_chart(const Vec3& p, const std::vector<Face>& tris, const PositionMap& pos, const UvMap& uv) {
  double best = std::numeric_limits<double>::infinity();
  Vec2 out = Vec2::Zero();
  for (const Face& t : tris) {
    const TrianglePoint hit = closest_point_on_triangle(p, pos.at(t[0]), pos.at(t[1]), pos.at(t[2]));
    const double d = (hit.point - p).squaredNorm();
    if (d < best) {
      best = d;
      out = hit.bary[0] * uv.at(t[0]) + hit.bary[1] * uv.at(t[1]) + hit.bary[2] * uv.at(t[2]);
    }
  }
  return out;
}

enum class BoundaryShape { Planar, Circle };

struct Plane {
  Vec3 origin;
  Vec3 u, v;
  Vec2 project(const Vec3& p) const { return {(p - origin).dot(u), (p - origin).dot(v)}; }
};

// Plane through the patch centroid, orthogonal to its area-weighted normal.
std::optional<Plane> patch_plane(const std::vector<Face>& tris, const PositionMap& pos) {
  Vec3 n = Vec3::Zero(), c = Vec3::Zero();
  for (const Face& t : tris) {
    n += (pos.at(t[1]) - pos.at(t[0])).cross(pos.at(t[2]) - pos.at(t[0]));
  }
  for (const auto& [id, p] : pos) c += p;
  if (!(n.norm() > 0.0)) return std::nullopt;
  n.normalize();
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = n.cross(helper).normalized();
  return Plane{c / static_cast<double>(pos.size()), u, n.cross(u)};
}

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double d1 = signed_area_2d(a, b, c), d2 = signed_area_2d(a, b, d);
  const double d3 = signed_area_2d(c, d, a), d4 = signed_area_2d(c, d, b);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

// Projected boundary loop, or empty if the projection is not a simple polygon.
std::vector<Vec2> planar_boundary(const Plane& plane, const std::vector<std::uint32_t>& loop, const PositionMap& pos) {
  std::vector<Vec2> out;
  for (std::uint32_t v : loop) out.push_back(plane.project(pos.at(v)));
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_cross(out[i], out[(i + 1) % n], out[j], out[(j + 1) % n])) return {};
    }
  }
  return out;
}

// Boundary to the unit circle by 3D arc length; the loop follows face
// orientation, so increasing angle keeps chart triangles counter-clockwise.
std::vector<Vec2> circle_boundary(const std::vector<std::uint32_t>& loop, const PositionMap& pos) {
  std::vector<double> arc(loop.size() + 1, 0.0);
  for (std::size_t i = 0; i < loop.size(); ++i) {
    arc[i + 1] = arc[i] + (pos.at(loop[(i + 1) % loop.size()]) - pos.at(loop[i])).norm();
  }
  if (!(arc.back() > 0.0)) return {};
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const double angle = 2.0 * std::numbers::pi * arc[i] / arc.back();
    out.emplace_back(std::cos(angle), std::sin(angle));
  }
  return out;
}

}  // namespace

ChartResult build_collapse_charts(const PatchInput& in) {
  // Directed patch edges; the boundary loop is the set of edges without a twin.
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  std::set<std::uint32_t> vertices;
  for (const PatchFace& f : in.faces) {
    for (int k = 0; k < 3; ++k) {
      if (++directed[{f.v[k], f.v[(k + 1) % 3]}] > 1) return reject(CollapseRejection::NotDisk);
      vertices.insert(f.v[k]);
    }
  }
  std::map<std::uint32_t, std::uint32_t> next;
  std::set<std::pair<std::uint32_t, std::uint32_t>> undirected;
  for (const auto& [e, count] : directed) {
    undirected.insert(std::minmax(e.first, e.second));
    if (directed.count({e.second, e.first}) == 0) {
      if (!next.emplace(e.first, e.second).second) return reject(CollapseRejection::NotDisk);
    }
  }
  if (next.size() < 3) return reject(CollapseRejection::NotDisk);

  std::vector<std::uint32_t> loop;
  loop.reserve(next.size());
  {
    const std::uint32_t start = next.begin()->first;
    std::uint32_t v = start;
    do {
      loop.push_back(v);
      const auto it = next.find(v);
      if (it == next.end() || loop.size() > next.size()) return reject(CollapseRejection::NotDisk);
      v = it->second;
    } while (v != start);
    if (loop.size() != next.size()) return reject(CollapseRejection::NotDisk);
  }

  const std::set<std::uint32_t> on_loop(loop.begin(), loop.end());
  std::vector<std::uint32_t> interior;
  for (std::uint32_t v : vertices) {
    if (!on_loop.count(v)) interior.push_back(v);
  }
  const std::vector<std::uint32_t> expected_interior =
      in.kept_on_boundary ? std::vector<std::uint32_t>{in.removed}
                          : std::vector<std::uint32_t>{std::min(in.kept, in.removed), std::max(in.kept, in.removed)};
  if (interior != expected_interior) return reject(CollapseRejection::NotDisk);
  const long euler = static_cast<long>(vertices.size()) - static_cast<long>(undirected.size()) +
                     static_cast<long>(in.faces.size());
  if (euler != 1) return reject(CollapseRejection::NotDisk);

  PositionMap pre_pos;
  for (std::uint32_t v : vertices) pre_pos[v] = in.position(v);

  std::vector<Face> pre_tris;
  std::vector<std::uint32_t> pre_ids;
  for (const PatchFace& f : in.faces) {
    pre_tris.push_back(f.v);
    pre_ids.push_back(f.id);
  }

  // Post-collapse patch: drop the two faces on the edge, rename removed -> kept.
  std::vector<Face> post_tris;
  std::vector<Face> post_source;
  for (const PatchFace& f : in.faces) {
    const bool has_kept = std::find(f.v.begin(), f.v.end(), in.kept) != f.v.end();
    const bool has_removed = std::find(f.v.begin(), f.v.end(), in.removed) != f.v.end();
    if (has_kept && has_removed) continue;
    Face t = f.v;
    for (auto& v : t) {
      if (v == in.removed) v = in.kept;
    }
    post_tris.push_back(t);
    post_source.push_back(f.v);
  }
  if (post_tris.size() + 2 != in.faces.size()) return reject(CollapseRejection::NotDisk);

  PositionMap post_pos = pre_pos;
  post_pos.erase(in.removed);
  post_pos[in.kept] = in.new_position;

  for (std::size_t k = 0; k < post_tris.size(); ++k) {
    const Face& s = post_source[k];
    const Face& t = post_tris[k];
    const FaceGeometry before = triangle_area_and_normal(pre_pos[s[0]], pre_pos[s[1]], pre_pos[s[2]]);
    const FaceGeometry after = triangle_area_and_normal(post_pos[t[0]], post_pos[t[1]], post_pos[t[2]]);
    if (after.degenerate || before.degenerate || before.normal.dot(after.normal) < in.min_normal_cosine) {
      return reject(CollapseRejection::Fold);
    }
  }

  const std::vector<std::uint32_t> post_interior =
      in.kept_on_boundary ? std::vector<std::uint32_t>{} : std::vector<std::uint32_t>{in.kept};
  UvMap pre_uv, post_uv;
  std::vector<Vec2> boundary_uv;
  bool charted = false;
  const std::optional<Plane> plane = patch_plane(pre_tris, pre_pos);
  for (BoundaryShape shape : {BoundaryShape::Planar, BoundaryShape::Circle}) {
    if (shape == BoundaryShape::Planar && !plane) continue;
    boundary_uv = shape == BoundaryShape::Planar ? planar_boundary(*plane, loop, pre_pos) : circle_boundary(loop, pre_pos);
    if (boundary_uv.empty()) continue;
    double polygon_area = 0.0;
    for (std::size_t i = 0; i < loop.size(); ++i) {
      polygon_area += signed_area_2d(Vec2::Zero(), boundary_uv[i], boundary_uv[(i + 1) % loop.size()]);
    }
    if (!(polygon_area > 0.0)) continue;
    UvMap uv;
    for (std::size_t i = 0; i < loop.size(); ++i) uv[loop[i]] = boundary_uv[i];

    pre_uv = uv;
    bool ok = false;
    if (shape == BoundaryShape::Planar) {
      for (std::uint32_t v : interior) pre_uv[v] = plane->project(pre_pos[v]);
      ok = chart_is_injective(pre_tris, pre_uv, polygon_area);
    }
    if (!ok) ok = parameterize(pre_tris, pre_pos, interior, polygon_area, pre_uv);
    if (!ok) continue;

    post_uv = uv;
    ok = in.kept_on_boundary;
    if (!ok) {
      post_uv[in.kept] = project_to_chart(in.new_position, pre_tris, pre_pos, pre_uv);
      ok = chart_is_injective(post_tris, post_uv, polygon_area);
    }
    if (!ok) ok = parameterize(post_tris, post_pos, post_interior, polygon_area, post_uv);
    if (ok) {
      charted = true;
      break;
    }
  }
  if (!charted) return reject(CollapseRejection::FlippedUv);

  std::vector<std::uint32_t> post_ids(post_tris.size());
  for (std::size_t k = 0; k < post_ids.size(); ++k) post_ids[k] = in.first_new_face_id + static_cast<std::uint32_t>(k);

  CollapseRecord record;
  record.kept = in.kept;
  record.removed = in.removed;
  record.new_position = in.new_position;
  record.boundary = std::move(loop);
  record.boundary_uv = std::move(boundary_uv);
  record.before = make_chart(pre_tris, pre_ids, pre_uv);
  record.after = make_chart(post_tris, post_ids, post_uv);
  return {std::move(record), CollapseRejection::None};
}

}  // namespace nmc::detail
