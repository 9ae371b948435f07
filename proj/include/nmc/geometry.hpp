#pragma once

#include "nmc/mesh.hpp"

namespace nmc {

struct TrianglePoint {
  Vec3 point;
  Vec3 bary;  // weights of (a, b, c), non-negative, summing to 1
};

/// Exact closest point on triangle abc (vertex, edge and interior regions).
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

inline double signed_area_2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

/// Barycentric coordinates of p w.r.t. a 2D triangle (may be negative outside).
Vec3 barycentric_2d(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c);

/// Clamps tiny negatives to zero and renormalizes to sum 1.
Vec3 clean_barycentric(const Vec3& bary);

}  // namespace nmc
