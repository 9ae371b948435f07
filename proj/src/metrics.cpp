#include "nmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <numeric>
#include <string>
#include <thread>

#include "nmc/error.hpp"
#include "nmc/geometry.hpp"
#include "nmc/rng.hpp"
#include "parallel.hpp"

namespace nmc {
namespace {

constexpr std::uint32_t kLeafSize = 4;

double box_distance2(const Vec3& q, const Vec3& lo, const Vec3& hi) {
  const Vec3 d = (lo - q).cwiseMax(q - hi).cwiseMax(0.0);
  return d.squaredNorm();
}

std::vector<Vec3> vertex_normals(const Mesh& mesh) {
  std::vector<Vec3> n(mesh.num_vertices(), Vec3::Zero());
  for (std::uint32_t f = 0; f < mesh.num_faces(); ++f) {
    const Vec3 c = (mesh.corner(f, 1) - mesh.corner(f, 0)).cross(mesh.corner(f, 2) - mesh.corner(f, 0));
    for (std::uint32_t v : mesh.faces()[f]) n[v] += c;  // |c| = 2 * area
  }
  for (Vec3& v : n) {
    const double len = v.norm();
    if (len > 0.0) v /= len;
  }
  return n;
}

Vec3 normal_at(const Mesh& mesh, const std::vector<Vec3>& vn, std::uint32_t face, const Vec3& bary,
               NormalPolicy policy) {
  if (policy == NormalPolicy::Face) return face_area_and_normal(mesh, face).normal;
  const Face& t = mesh.faces()[face];
  const Vec3 n = bary[0] * vn[t[0]] + bary[1] * vn[t[1]] + bary[2] * vn[t[2]];
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3(Vec3::Zero());
}

}  // namespace

unsigned default_thread_count() {
  if (const char* env = std::getenv("NMC_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Vec3 surface_normal(const Mesh& mesh, std::uint32_t face, const Vec3& bary, NormalPolicy policy) {
  if (policy == NormalPolicy::Face) return face_area_and_normal(mesh, face).normal;
  return normal_at(mesh, vertex_normals(mesh), face, bary, policy);
}

std::vector<SampledPoint> sample_surface(const Mesh& mesh, std::size_t count, std::uint64_t seed,
                                         NormalPolicy normals) {
  std::vector<SampledPoint> out;
  if (count == 0) return out;
  std::vector<double> cumulative(mesh.num_faces());
  double total = 0.0;
  for (std::uint32_t f = 0; f < mesh.num_faces(); ++f) {
    total += face_area_and_normal(mesh, f).area;
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw MeshError("cannot sample a mesh with zero surface area");

  const std::vector<Vec3> vn = normals == NormalPolicy::Smooth ? vertex_normals(mesh) : std::vector<Vec3>{};
  Rng rng(seed);
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double r = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    if (it == cumulative.end()) --it;
    const auto face = static_cast<std::uint32_t>(it - cumulative.begin());
    const double s = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3 bary(1.0 - s, s * (1.0 - r2), s * r2);
    out.push_back({mesh.point_on_face(face, bary), normal_at(mesh, vn, face, bary, normals), face, bary});
  }
  return out;
}

SpatialIndex::SpatialIndex(const Mesh& mesh) : mesh_(mesh) {
  const auto n = static_cast<std::uint32_t>(mesh_.num_faces());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t f = 0; f < n; ++f) {
    centroids[f] = (mesh_.corner(f, 0) + mesh_.corner(f, 1) + mesh_.corner(f, 2)) / 3.0;
  }
  if (n > 0) {
    nodes_.reserve(2 * n / kLeafSize + 2);
    build(0, n, centroids);
  }
}

std::uint32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo = Vec3::Constant(INFINITY), hi = Vec3::Constant(-INFINITY);
  Vec3 clo = lo, chi = hi;
  for (std::uint32_t i = begin; i < end; ++i) {
    const std::uint32_t f = order_[i];
    for (int k = 0; k < 3; ++k) {
      lo = lo.cwiseMin(mesh_.corner(f, k));
      hi = hi.cwiseMax(mesh_.corner(f, k));
    }
    clo = clo.cwiseMin(centroids[f]);
    chi = chi.cwiseMax(centroids[f]);
  }
  nodes_[index].lo = lo;
  nodes_[index].hi = hi;
  if (end - begin <= kLeafSize) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    return index;
  }
  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t x, std::uint32_t y) {
                     return centroids[x][axis] != centroids[y][axis] ? centroids[x][axis] < centroids[y][axis] : x < y;
                   });
  const std::uint32_t left = build(begin, mid, centroids);
  const std::uint32_t right = build(mid, end, centroids);
  nodes_[index].first = left;
  nodes_[index].right = right;
  return index;
}

ClosestHit SpatialIndex::closest_point(const Vec3& q) const {
  ClosestHit best;
  double best_d2 = INFINITY;
  best.face = UINT32_MAX;
  if (nodes_.empty()) return best;
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_distance2(q, node.lo, node.hi) > best_d2) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t f = order_[i];
        const TrianglePoint tp = closest_point_on_triangle(q, mesh_.corner(f, 0), mesh_.corner(f, 1), mesh_.corner(f, 2));
        const double d2 = (tp.point - q).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && f < best.face)) {
          best_d2 = d2;
          best.face = f;
          best.point = tp.point;
          best.bary = tp.bary;
        }
      }
      continue;
    }
    const double dl = box_distance2(q, nodes_[node.first].lo, nodes_[node.first].hi);
    const double dr = box_distance2(q, nodes_[node.right].lo, nodes_[node.right].hi);
    // Push the farther child first so the nearer one is searched first.
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.first;
    } else {
      stack[top++] = node.first;
      stack[top++] = node.right;
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

ClosestHit closest_point_brute_force(const Mesh& mesh, const Vec3& q) {
  ClosestHit best;
  double best_d2 = INFINITY;
  for (std::uint32_t f = 0; f < mesh.num_faces(); ++f) {
    const TrianglePoint tp = closest_point_on_triangle(q, mesh.corner(f, 0), mesh.corner(f, 1), mesh.corner(f, 2));
    const double d2 = (tp.point - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = {tp.point, f, 0.0, tp.bary};
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

namespace {

struct Direction {
  double mean_distance = 0.0;
  double mean_angle = 0.0;
  std::size_t valid_angles = 0;
  double angle_sum = 0.0;
};

Direction one_direction(const Mesh& from, const Mesh& to, const MetricOptions& options, std::uint64_t seed) {
  Direction out;
  if (options.samples == 0) return out;
  const std::vector<SampledPoint> samples = sample_surface(from, options.samples, seed, options.normals);
  const SpatialIndex index(to);
  const std::vector<Vec3> vn = options.normals == NormalPolicy::Smooth ? vertex_normals(to) : std::vector<Vec3>{};
  std::vector<double> dist(samples.size()), angle(samples.size());
  detail::parallel_for(samples.size(), options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const ClosestHit hit = index.closest_point(samples[i].position);
      dist[i] = hit.distance;
      const Vec3 n = normal_at(to, vn, hit.face, hit.bary, options.normals);
      const Vec3& m = samples[i].normal;
      if (n.isZero() || m.isZero()) {
        angle[i] = NAN;
      } else {
        angle[i] = std::acos(std::clamp(m.dot(n), -1.0, 1.0)) * 180.0 / std::numbers::pi;
      }
    }
  });
  out.mean_distance = detail::stable_sum(dist) / static_cast<double>(dist.size());
  std::vector<double> valid;
  valid.reserve(angle.size());
  for (double a : angle) {
    if (!std::isnan(a)) valid.push_back(a);
  }
  out.valid_angles = valid.size();
  out.angle_sum = detail::stable_sum(valid);
  out.mean_angle = valid.empty() ? 0.0 : out.angle_sum / static_cast<double>(valid.size());
  return out;
}

}  // namespace

QualityReport evaluate_quality(const Mesh& a, const Mesh& b, const MetricOptions& options) {
  const Direction ab = one_direction(a, b, options, options.seed);
  const Direction ba = one_direction(b, a, options, options.seed + 1);
  QualityReport r;
  r.samples = options.samples;
  r.d_a_to_b = ab.mean_distance;
  r.d_b_to_a = ba.mean_distance;
  r.d_pm = r.d_a_to_b + r.d_b_to_a;
  r.d_norm_a_to_b = ab.mean_angle;
  r.d_norm_b_to_a = ba.mean_angle;
  const std::size_t valid = ab.valid_angles + ba.valid_angles;
  r.d_norm = valid > 0 ? (ab.angle_sum + ba.angle_sum) / static_cast<double>(valid) : 0.0;
  r.excluded_normals = 2 * options.samples - valid;
  return r;
}

double d_pm(const Mesh& a, const Mesh& b, const MetricOptions& options) { return evaluate_quality(a, b, options).d_pm; }

double d_norm(const Mesh& a, const Mesh& b, const MetricOptions& options) {
  return evaluate_quality(a, b, options).d_norm;
}

}  // namespace nmc
