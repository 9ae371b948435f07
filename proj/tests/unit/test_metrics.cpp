#include <doctest.h>

#include <cmath>
#include <numbers>

#include "meshes.hpp"
#include "nmc/error.hpp"
#include "nmc/geometry.hpp"
#include "nmc/metrics.hpp"
#include "nmc/rng.hpp"

using namespace nmc;

namespace {

Mesh translated(const Mesh& m, const Vec3& t) {
  std::vector<Vec3> v = m.vertices();
  for (Vec3& p : v) p += t;
  return Mesh(std::move(v), m.faces());
}

// Flat grid centered on the origin, spanning [-0.5, 0.5]^2.
Mesh centered_grid(int n) { return translated(testing::grid(n), Vec3(-0.5, -0.5, 0)); }

}  // namespace

TEST_CASE("sampling is area-uniform and deterministic") {
  const Mesh sq = testing::unit_square();
  const std::size_t n = 100000;
  const auto samples = sample_surface(sq, n, 4);
  REQUIRE(samples.size() == n);
  std::size_t first = 0;
  for (const SampledPoint& s : samples) {
    if (s.face == 0) ++first;
    CHECK((sq.point_on_face(s.face, s.bary) - s.position).norm() < 1e-9);
    CHECK(s.bary.minCoeff() >= 0.0);
  }
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(static_cast<double>(first) - n / 2.0) < 3 * sigma);
  CHECK(sample_surface(sq, 0, 4).empty());

  const auto again = sample_surface(sq, 1000, 9);
  const auto same = sample_surface(sq, 1000, 9);
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].position == same[i].position);

  const Mesh flat({Vec3::Zero(), Vec3::UnitX(), Vec3(2, 0, 0)}, {Face{0, 1, 2}});
  CHECK_THROWS_AS(sample_surface(flat, 10, 0), MeshError);
}

TEST_CASE("uniform barycentrics fill a triangle evenly") {
  // Quarter the unit triangle at its edge midpoints; each quarter gets 1/4 of the samples.
  const Mesh t = testing::single_triangle();
  const std::size_t n = 80000;
  std::array<std::size_t, 4> counts{};
  for (const SampledPoint& s : sample_surface(t, n, 12)) {
    const Vec3& b = s.bary;
    const int region = b[0] > 0.5 ? 0 : b[1] > 0.5 ? 1 : b[2] > 0.5 ? 2 : 3;
    ++counts[region];
  }
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (std::size_t c : counts) CHECK(std::abs(static_cast<double>(c) - n / 4.0) < 4 * sigma);
}

TEST_CASE("closest point queries match brute force") {
  const Mesh m = testing::noisy_icosphere(3, 0.1, 1, 4, 6, 21);
  const SpatialIndex index(m);
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 q(rng.uniform(-1.6, 1.6), rng.uniform(-1.6, 1.6), rng.uniform(-1.6, 1.6));
    const ClosestHit a = index.closest_point(q);
    const ClosestHit b = closest_point_brute_force(m, q);
    CHECK(std::abs(a.distance - b.distance) < 1e-9);
    CHECK(std::abs((a.point - q).norm() - a.distance) < 1e-12);
    CHECK((m.point_on_face(a.face, a.bary) - a.point).norm() < 1e-9);
  }
  // Queries exactly on vertices are shared by several faces; ties go to the lowest index.
  for (std::uint32_t v = 0; v < 50; ++v) {
    const ClosestHit a = index.closest_point(m.vertices()[v]);
    CHECK(a.distance == 0.0);
    CHECK(a.face == m.adjacency().vertex_faces[v].front());
    CHECK(a.face == closest_point_brute_force(m, m.vertices()[v]).face);
  }
}

TEST_CASE("closest point above a triangle") {
  const Mesh t = testing::single_triangle();
  const Vec3 centroid = (t.vertices()[0] + t.vertices()[1] + t.vertices()[2]) / 3.0;
  const Vec3 n = face_area_and_normal(t, 0).normal;
  const ClosestHit hit = SpatialIndex(t).closest_point(centroid + 0.25 * n);
  CHECK(hit.distance == doctest::Approx(0.25));
  CHECK((hit.point - centroid).norm() < 1e-12);
}

TEST_CASE("identical meshes have zero error") {
  const Mesh m = testing::torus(20, 10);
  const QualityReport q = evaluate_quality(m, m, {20000, 3, 0, NormalPolicy::Face});
  CHECK(q.d_pm < 1e-9);
  CHECK(q.d_norm < 1e-3);
  CHECK(q.d_pm == q.d_a_to_b + q.d_b_to_a);
  CHECK(q.samples == 20000);
}

TEST_CASE("parallel planes are 2h apart") {
  const double h = 0.01;
  const Mesh a = centered_grid(11);
  const Mesh b = translated(centered_grid(11), Vec3(0, 0, h));
  const QualityReport q = evaluate_quality(a, b, {50000, 1, 0, NormalPolicy::Face});
  CHECK(std::abs(q.d_pm - 2 * h) < 0.02 * 2 * h);
  CHECK(q.d_norm < 1e-6);
}

TEST_CASE("spheres of nearby radii") {
  const double eps = 0.01;
  const Mesh a = testing::icosphere(5);
  const Mesh b = testing::scale(a, 1 + eps);
  // Faceting is identical in both, so the offset is exactly eps along the face normals
  // up to the small angle between vertex directions and face normals.
  CHECK(d_pm(a, b, {50000, 5, 0, NormalPolicy::Face}) == doctest::Approx(2 * eps).epsilon(0.02));
}

TEST_CASE("rotated plane gives the rotation angle") {
  const Mesh a = centered_grid(9);
  const Mesh b = testing::rotate(a, Vec3::UnitX(), 10.0);
  const QualityReport q = evaluate_quality(a, b, {50000, 7, 0, NormalPolicy::Face});
  CHECK(std::abs(q.d_norm - 10.0) < 0.2);

  const Mesh flipped = testing::rotate(a, Vec3::UnitX(), 180.0);
  CHECK(d_norm(a, flipped, {2000, 1, 1, NormalPolicy::Face}) == doctest::Approx(180.0));
}

TEST_CASE("metrics are symmetric, scale correctly and ignore thread count") {
  const Mesh a = testing::noisy_icosphere(3, 0.05, 1, 3, 4, 1);
  const Mesh b = testing::noisy_icosphere(3, 0.05, 1, 3, 4, 2);
  const MetricOptions one{30000, 8, 1, NormalPolicy::Face};
  const MetricOptions many{30000, 8, 4, NormalPolicy::Face};
  const QualityReport ab = evaluate_quality(a, b, one);
  const QualityReport ab4 = evaluate_quality(a, b, many);
  CHECK(ab.d_pm == ab4.d_pm);
  CHECK(ab.d_norm == ab4.d_norm);

  // Swapping the meshes swaps which side uses which seed, so only the totals agree approximately.
  const QualityReport ba = evaluate_quality(b, a, one);
  CHECK(ba.d_pm == doctest::Approx(ab.d_pm).epsilon(0.05));

  const QualityReport scaled = evaluate_quality(testing::scale(a, 3.0), testing::scale(b, 3.0), one);
  CHECK(scaled.d_pm == doctest::Approx(3.0 * ab.d_pm).epsilon(1e-3));
  CHECK(scaled.d_norm == doctest::Approx(ab.d_norm).epsilon(1e-3));
}

TEST_CASE("one-sided distance is bounded by the Hausdorff distance") {
  const Mesh a = testing::icosphere(2);
  const Mesh b = testing::noisy_icosphere(2, 0.08, 1, 3, 4, 5);
  const QualityReport q = evaluate_quality(a, b, {5000, 2, 0, NormalPolicy::Face});
  // Brute-force Hausdorff lower bound over a's vertices and sampled points.
  double hausdorff = 0.0;
  for (const SampledPoint& s : sample_surface(a, 5000, 2)) {
    hausdorff = std::max(hausdorff, closest_point_brute_force(b, s.position).distance);
  }
  CHECK(q.d_a_to_b <= hausdorff);
  CHECK(q.d_a_to_b > 0.0);
}

TEST_CASE("smooth normals policy") {
  const Mesh m = testing::icosphere(3);
  const Vec3 n = surface_normal(m, 0, Vec3(1.0 / 3, 1.0 / 3, 1.0 / 3), NormalPolicy::Smooth);
  CHECK(n.norm() == doctest::Approx(1.0));
  const Vec3 f = surface_normal(m, 0, Vec3(1.0 / 3, 1.0 / 3, 1.0 / 3), NormalPolicy::Face);
  CHECK(n.dot(f) > 0.99);
  const QualityReport q = evaluate_quality(m, m, {5000, 1, 0, NormalPolicy::Smooth});
  CHECK(q.d_norm < 1e-3);
}
