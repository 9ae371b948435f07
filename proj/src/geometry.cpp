#include "nmc/geometry.hpp"

namespace nmc {

// Region walk from Ericson, "Real-Time Collision Detection", 5.1.5.
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return {a, Vec3(1, 0, 0)};

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return {b, Vec3(0, 1, 0)};

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return {a + v * ab, Vec3(1 - v, v, 0)};
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return {c, Vec3(0, 0, 1)};

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return {a + w * ac, Vec3(1 - w, 0, w)};
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + w * (c - b), Vec3(0, 1 - w, w)};
  }

  const double denom = va + vb + vc;
  if (denom == 0.0) {
    // Degenerate triangle: the edge walk above already covers every non-interior case
    // for proper triangles; fall back to the nearest vertex.
    const double da = (p - a).squaredNorm(), db = (p - b).squaredNorm(), dc = (p - c).squaredNorm();
    if (da <= db && da <= dc) return {a, Vec3(1, 0, 0)};
    if (db <= dc) return {b, Vec3(0, 1, 0)};
    return {c, Vec3(0, 0, 1)};
  }
  const double v = vb / denom;
  const double w = vc / denom;
  return {a + ab * v + ac * w, Vec3(1 - v - w, v, w)};
}

Vec3 barycentric_2d(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double area = signed_area_2d(a, b, c);
  const double wa = signed_area_2d(p, b, c) / area;
  const double wb = signed_area_2d(a, p, c) / area;
  return Vec3(wa, wb, 1.0 - wa - wb);
}

Vec3 clean_barycentric(const Vec3& bary) {
  Vec3 w = bary.cwiseMax(0.0);
  const double s = w.sum();
  if (s <= 0.0) return Vec3(1.0 / 3, 1.0 / 3, 1.0 / 3);
  return w / s;
}

}  // namespace nmc
