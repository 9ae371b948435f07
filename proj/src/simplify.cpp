#include "nmc/simplify.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <ostream>
#include <queue>
#include <unordered_map>

#include <Eigen/Dense>

#include "nmc/error.hpp"
#include "nmc/geometry.hpp"
#include "ssp_chart.hpp"

namespace nmc {

const char* to_string(CollapseRejection r) {
  switch (r) {
    case CollapseRejection::None: return "none";
    case CollapseRejection::BoundaryEdge: return "boundary edge";
    case CollapseRejection::BoundaryEndpoints: return "both endpoints on boundary";
    case CollapseRejection::NotDisk: return "one-ring is not a disk";
    case CollapseRejection::FlippedUv: return "flipped chart triangle";
    case CollapseRejection::Fold: return "3D fold";
  }
  return "?";
}

Quadric Quadric::from_plane(const Vec3& n, double d) {
  const Eigen::Vector4d p(n.x(), n.y(), n.z(), d);
  return {p * p.transpose()};
}

double Quadric::error(const Vec3& p) const {
  const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
  return std::max(0.0, h.dot(m * h));
}

// ---------------------------------------------------------------------------
// SspMap

SspMap::SspMap(std::shared_ptr<const Mesh> original, std::shared_ptr<const Mesh> coarse,
               std::vector<CollapseRecord> records, std::vector<std::uint32_t> coarse_face_ids)
    : original_(std::move(original)),
      coarse_(std::move(coarse)),
      records_(std::move(records)),
      coarse_face_ids_(std::move(coarse_face_ids)) {
  if (coarse_face_ids_.size() != coarse_->num_faces()) {
    throw MeshError("SspMap: coarse face id table does not match the coarse mesh");
  }
  const std::uint32_t base = static_cast<std::uint32_t>(original_->num_faces());
  for (std::uint32_t r = 0; r < records_.size(); ++r) {
    for (std::uint32_t k = 0; k < records_[r].after.size(); ++k) {
      const std::uint32_t id = records_[r].after[k].face_id;
      if (id < base) throw MeshError("SspMap: collapse record reuses an original face id");
      if (created_.size() <= id - base) created_.resize(id - base + 1);
      created_[id - base] = {r, k};
    }
  }
}

SspMap SspMap::identity(std::shared_ptr<const Mesh> original, std::shared_ptr<const Mesh> coarse) {
  if (original->faces() != coarse->faces()) {
    throw MeshError("identity SspMap needs identical connectivity");
  }
  std::vector<std::uint32_t> ids(coarse->num_faces());
  std::iota(ids.begin(), ids.end(), 0u);
  return SspMap(std::move(original), std::move(coarse), {}, std::move(ids));
}

namespace {

// Epsilon for barycentric sign tests inside charts.
constexpr double kChartInsideEps = 1e-12;

struct Located {
  std::uint32_t index;
  Vec3 bary;
};

Located locate_in_chart(const std::vector<ChartTriangle>& chart, const Vec2& uv) {
  for (std::uint32_t t = 0; t < chart.size(); ++t) {
    const auto& c = chart[t].uv;
    const Vec3 w = barycentric_2d(uv, c[0], c[1], c[2]);
    if (w.minCoeff() >= -kChartInsideEps) return {t, clean_barycentric(w)};
  }
  // Nearest triangle: reached only through round-off on chart edges.
  Located best{0, Vec3(1, 0, 0)};
  double best_d = INFINITY;
  const Vec3 q(uv.x(), uv.y(), 0.0);
  for (std::uint32_t t = 0; t < chart.size(); ++t) {
    const auto& c = chart[t].uv;
    const TrianglePoint tp = closest_point_on_triangle(q, Vec3(c[0].x(), c[0].y(), 0), Vec3(c[1].x(), c[1].y(), 0),
                                                       Vec3(c[2].x(), c[2].y(), 0));
    const double d = (tp.point - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = {t, clean_barycentric(tp.bary)};
    }
  }
  return best;
}

}  // namespace

SurfacePoint SspMap::step_back(const CollapseRecord& record, std::uint32_t local, const Vec3& bary) const {
  const auto& uv = record.after[local].uv;
  const Vec2 p = bary[0] * uv[0] + bary[1] * uv[1] + bary[2] * uv[2];
  const Located hit = locate_in_chart(record.before, p);
  return {record.before[hit.index].face_id, hit.bary};
}

SurfacePoint SspMap::trace(const SurfacePoint& p) const {
  const std::uint32_t base = static_cast<std::uint32_t>(original_->num_faces());
  SurfacePoint cur{coarse_face_ids_.at(p.face), p.bary};
  while (cur.face >= base) {
    const FaceOrigin& origin = created_[cur.face - base];
    cur = step_back(records_[origin.record], origin.local, cur.bary);
  }
  return cur;
}

SurfacePoint SspMap::trace_iterated(const SurfacePoint& p) const {
  SurfacePoint cur{coarse_face_ids_.at(p.face), p.bary};
  for (std::size_t r = records_.size(); r-- > 0;) {
    const auto& after = records_[r].after;
    const auto it = std::find_if(after.begin(), after.end(), [&](const ChartTriangle& t) { return t.face_id == cur.face; });
    if (it != after.end()) cur = step_back(records_[r], static_cast<std::uint32_t>(it - after.begin()), cur.bary);
  }
  return cur;
}

Vec3 SspMap::map_point(const SurfacePoint& p) const {
  const SurfacePoint q = trace(p);
  return original_->point_on_face(q.face, q.bary);
}

Vec3 SspMap::displacement(const SurfacePoint& p) const {
  return map_point(p) - coarse_->point_on_face(p.face, p.bary);
}

// ---------------------------------------------------------------------------
// Chart construction on a static mesh

ChartResult flatten_collapse_neighborhood(const Mesh& mesh, EdgeKey edge, const Vec3& new_position) {
  const auto& vf = mesh.adjacency().vertex_faces;
  const ManifoldReport report = validate_edge_manifold(mesh);
  std::vector<bool> boundary(mesh.num_vertices(), false);
  bool edge_on_boundary = false;
  for (const EdgeKey& e : report.boundary_edges) {
    boundary[e.a] = boundary[e.b] = true;
    if (e == edge) edge_on_boundary = true;
  }
  if (edge_on_boundary) return {std::nullopt, CollapseRejection::BoundaryEdge};
  if (boundary[edge.a] && boundary[edge.b]) return {std::nullopt, CollapseRejection::BoundaryEndpoints};

  detail::PatchInput in;
  in.kept_on_boundary = boundary[edge.b];
  in.kept = in.kept_on_boundary ? edge.b : edge.a;
  in.removed = in.kept_on_boundary ? edge.a : edge.b;
  in.new_position = new_position;
  in.position = [&mesh](std::uint32_t v) { return mesh.vertices()[v]; };
  in.first_new_face_id = static_cast<std::uint32_t>(mesh.num_faces());
  std::vector<std::uint32_t> ids = vf[edge.a];
  ids.insert(ids.end(), vf[edge.b].begin(), vf[edge.b].end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (std::uint32_t f : ids) in.faces.push_back({f, mesh.faces()[f]});
  return detail::build_collapse_charts(in);
}

// ---------------------------------------------------------------------------
// Decimation

namespace {

constexpr double kSingularDeterminant = 1e-12;
// Optimal placements farther than this many edge lengths from the edge midpoint
// come from ill-conditioned quadrics and are replaced by the endpoint/midpoint choice.
constexpr double kMaxPlacementReach = 2.0;

struct Candidate {
  double cost;
  std::uint64_t key;
  std::uint32_t stamp;
  // Min-heap on (cost, edge key).
  bool operator>(const Candidate& o) const { return cost != o.cost ? cost > o.cost : key > o.key; }
};

struct Placement {
  double cost = 0.0;
  Vec3 position = Vec3::Zero();
  std::uint32_t kept = 0;
  std::uint32_t removed = 0;
};

class Decimator {
 public:
  Decimator(const Mesh& mesh, const DecimateOptions& options) : options_(options), original_faces_(mesh.num_faces()) {
    pos_ = mesh.vertices();
    alive_v_.assign(pos_.size(), true);
    alive_count_ = pos_.size();
    faces_ = mesh.faces();
    alive_f_.assign(faces_.size(), true);
    vfaces_ = mesh.adjacency().vertex_faces;
    boundary_.assign(pos_.size(), false);
    for (const EdgeKey& e : validate_edge_manifold(mesh).boundary_edges) boundary_[e.a] = boundary_[e.b] = true;

    quadric_.assign(pos_.size(), Quadric{});
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      const FaceGeometry g = face_area_and_normal(mesh, f);
      if (g.degenerate) continue;
      const Quadric q = Quadric::from_plane(g.normal, -g.normal.dot(mesh.corner(f, 0)));
      for (std::uint32_t v : faces_[f]) quadric_[v] += q;
    }
    for (const EdgeKey& e : mesh.edges()) push(e);
  }

  void run(std::size_t target) {
    while (alive_count_ > target && alive_count_ > 4 && !heap_.empty()) {
      const Candidate c = heap_.top();
      heap_.pop();
      const EdgeKey e(static_cast<std::uint32_t>(c.key >> 32), static_cast<std::uint32_t>(c.key));
      if (!alive_v_[e.a] || !alive_v_[e.b]) continue;
      const auto st = stamp_.find(c.key);
      if (st == stamp_.end() || st->second != c.stamp) continue;
      if (!try_collapse(e)) {
        int& n = rejections_[c.key];
        ++n;
        ++rejected_;
        if (n < options_.max_rejections) {
          heap_.push({c.cost * options_.rejection_penalty + 1e-300, c.key, c.stamp});
        } else {
          stamp_.erase(c.key);  // frozen until its neighborhood changes
        }
      }
    }
  }

  DecimationResult finish(const Mesh& original, std::size_t target) {
    std::vector<std::uint32_t> remap(pos_.size(), UINT32_MAX);
    std::vector<Vec3> verts;
    for (std::uint32_t v = 0; v < pos_.size(); ++v) {
      if (!alive_v_[v]) continue;
      remap[v] = static_cast<std::uint32_t>(verts.size());
      verts.push_back(pos_[v]);
    }
    std::vector<Face> faces;
    std::vector<std::uint32_t> ids;
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      if (!alive_f_[f]) continue;
      faces.push_back({remap[faces_[f][0]], remap[faces_[f][1]], remap[faces_[f][2]]});
      ids.push_back(f);
    }
    auto coarse = std::make_shared<const Mesh>(std::move(verts), std::move(faces));
    auto orig = std::make_shared<const Mesh>(original);

    DecimationResult result;
    result.coarse = *coarse;
    result.collapses = records_.size();
    result.rejections = rejected_;
    result.reached_target = coarse->num_vertices() <= target;
    if (!result.reached_target) {
      result.warnings.push_back("decimation stopped at " + std::to_string(coarse->num_vertices()) +
                                " vertices: no legal collapse remains above the target of " + std::to_string(target));
    }
    if (euler_characteristic(*coarse) != euler_characteristic(original)) {
      result.warnings.push_back("coarse mesh Euler characteristic differs from the original (topology changed)");
    }
    if (connected_components(*coarse) != connected_components(original)) {
      result.warnings.push_back("coarse mesh has a different number of connected components than the original");
    }
    result.map = SspMap(std::move(orig), std::move(coarse), std::move(records_), std::move(ids));
    return result;
  }

 private:
  Placement place(EdgeKey e) const {
    Placement p;
    const Quadric q = quadric_[e.a] + quadric_[e.b];
    if (boundary_[e.a] != boundary_[e.b]) {
      p.kept = boundary_[e.a] ? e.a : e.b;
      p.removed = boundary_[e.a] ? e.b : e.a;
      p.position = pos_[p.kept];
      p.cost = q.error(p.position);
      return p;
    }
    p.kept = e.a;
    p.removed = e.b;
    const Vec3 mid = 0.5 * (pos_[e.a] + pos_[e.b]);
    const Eigen::Matrix3d a = q.m.topLeftCorner<3, 3>();
    const double det = a.determinant();
    if (std::abs(det) >= kSingularDeterminant) {
      const Vec3 x = a.fullPivLu().solve(-q.m.block<3, 1>(0, 3));
      const double reach = kMaxPlacementReach * (pos_[e.a] - pos_[e.b]).norm();
      if (x.allFinite() && (x - mid).norm() <= reach) {
        p.position = x;
        p.cost = q.error(x);
        return p;
      }
    }
    p.position = mid;
    p.cost = q.error(mid);
    for (const Vec3& c : {pos_[e.a], pos_[e.b]}) {
      const double err = q.error(c);
      if (err < p.cost) {
        p.cost = err;
        p.position = c;
      }
    }
    return p;
  }

  void push(EdgeKey e) {
    if (boundary_[e.a] && boundary_[e.b]) return;  // boundary edges and boundary-pinching edges
    const Placement p = place(e);
    const std::uint32_t s = ++next_stamp_;
    stamp_[e.packed()] = s;
    heap_.push({p.cost, e.packed(), s});
  }

  std::vector<std::uint32_t> one_ring(std::uint32_t v) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t f : vfaces_[v]) {
      for (std::uint32_t u : faces_[f]) {
        if (u != v) out.push_back(u);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool try_collapse(EdgeKey e) {
    // Link condition: the edge's endpoints share exactly the two opposite vertices.
    const std::vector<std::uint32_t> ra = one_ring(e.a), rb = one_ring(e.b);
    std::vector<std::uint32_t> common;
    std::set_intersection(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(common));
    int shared_faces = 0;
    for (std::uint32_t f : vfaces_[e.a]) {
      if (std::find(faces_[f].begin(), faces_[f].end(), e.b) != faces_[f].end()) ++shared_faces;
    }
    if (shared_faces != 2 || common.size() != 2) return false;

    const Placement p = place(e);
    detail::PatchInput in;
    in.kept = p.kept;
    in.removed = p.removed;
    in.kept_on_boundary = boundary_[p.kept];
    in.new_position = p.position;
    in.position = [this](std::uint32_t v) { return pos_[v]; };
    in.first_new_face_id = static_cast<std::uint32_t>(faces_.size());
    in.min_normal_cosine = options_.min_normal_cosine;
    std::vector<std::uint32_t> ids = vfaces_[e.a];
    ids.insert(ids.end(), vfaces_[e.b].begin(), vfaces_[e.b].end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (std::uint32_t f : ids) in.faces.push_back({f, faces_[f]});

    ChartResult chart = detail::build_collapse_charts(in);
    if (!chart.record) return false;
    commit(std::move(*chart.record), ids);
    return true;
  }

  void commit(CollapseRecord record, const std::vector<std::uint32_t>& patch) {
    for (std::uint32_t f : patch) {
      alive_f_[f] = false;
      for (std::uint32_t v : faces_[f]) {
        auto& list = vfaces_[v];
        list.erase(std::remove(list.begin(), list.end(), f), list.end());
      }
    }
    for (const ChartTriangle& t : record.after) {
      assert(t.face_id == faces_.size());
      faces_.push_back(t.vertices);
      alive_f_.push_back(true);
      for (std::uint32_t v : t.vertices) vfaces_[v].push_back(t.face_id);
    }
    const std::uint32_t kept = record.kept, removed = record.removed;
    alive_v_[removed] = false;
    --alive_count_;
    vfaces_[removed].clear();
    pos_[kept] = record.new_position;
    quadric_[kept] += quadric_[removed];
    records_.push_back(std::move(record));

    for (std::uint32_t n : one_ring(kept)) {
      const EdgeKey e(kept, n);
      rejections_.erase(e.packed());
      push(e);
    }
  }

  DecimateOptions options_;
  std::size_t original_faces_;
  std::vector<Vec3> pos_;
  std::vector<bool> alive_v_;
  std::size_t alive_count_ = 0;
  std::vector<Face> faces_;
  std::vector<bool> alive_f_;
  std::vector<std::vector<std::uint32_t>> vfaces_;
  std::vector<bool> boundary_;
  std::vector<Quadric> quadric_;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap_;
  std::unordered_map<std::uint64_t, std::uint32_t> stamp_;
  std::uint32_t next_stamp_ = 0;
  std::unordered_map<std::uint64_t, int> rejections_;
  std::size_t rejected_ = 0;
  std::vector<CollapseRecord> records_;
};

}  // namespace

DecimationResult qslim_decimate_with_ssp(const Mesh& mesh, std::size_t target_vertices, const DecimateOptions& options) {
  const ManifoldReport report = validate_edge_manifold(mesh);
  if (!report.is_edge_manifold) {
    throw MeshError("decimation needs an edge-manifold mesh; " + std::to_string(report.non_manifold_edges.size()) +
                    " edges are shared by more than two faces");
  }
  Decimator d(mesh, options);
  d.run(target_vertices);
  return d.finish(mesh, target_vertices);
}

void write_collapse_log(std::ostream& out, const SspMap& map) {
  out << "# collapses " << map.records().size() << "\n";
  for (std::size_t r = 0; r < map.records().size(); ++r) {
    const CollapseRecord& c = map.records()[r];
    out << r << " kept " << c.kept << " removed " << c.removed << " at " << c.new_position.transpose() << " ring "
        << c.boundary.size() << " before";
    for (const auto& t : c.before) out << ' ' << t.face_id;
    out << " after";
    for (const auto& t : c.after) out << ' ' << t.face_id;
    out << '\n';
  }
}

}  // namespace nmc
