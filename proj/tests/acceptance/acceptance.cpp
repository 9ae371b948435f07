#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "meshes.hpp"
#include "nmc/ablate.hpp"
#include "nmc/container.hpp"
#include "nmc/huffman.hpp"
#include "nmc/metrics.hpp"
#include "nmc/pipeline.hpp"
#include "nmc/prune.hpp"
#include "nmc/quantize.hpp"
#include "nmc/rng.hpp"
#include "nmc/simplify.hpp"
#include "nmc/subdivide.hpp"

using namespace nmc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// A1

struct Toy {
  std::vector<Vec3> positions;
  std::vector<std::uint32_t> offsets{0}, neighbors;
  std::vector<double> lengths;
  std::vector<Vec3> targets;
};

Toy random_toy(std::size_t n, Rng& rng) {
  Toy t;
  for (std::size_t i = 0; i < n; ++i) {
    t.positions.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    t.targets.emplace_back(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto deg = 3 + rng.below(4);
    for (std::uint64_t d = 0; d < deg; ++d) {
      auto j = static_cast<std::uint32_t>(rng.below(n));
      if (j == i) j = static_cast<std::uint32_t>((j + 1) % n);
      t.neighbors.push_back(j);
      t.lengths.push_back((t.positions[i] - t.positions[j]).norm());
    }
    t.offsets.push_back(static_cast<std::uint32_t>(t.neighbors.size()));
  }
  return t;
}

VertexBatch toy_batch(const Toy& t, int q) {
  return encode_vertices({t.positions, t.offsets, t.neighbors, t.lengths}, q, t.targets);
}

Outcome gradient_check() {
  double worst = 0.0;
  int nets = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (int l : {2, 4}) {
      for (int k : {8, 16}) {
        for (int g : {0, 1, 2}) {
          Rng rng(seed * 1000 + static_cast<std::uint64_t>(l * 100 + k * 10 + g));
          const Architecture arch{3, l, k, g};
          InrParams p = InrParams::initialize(arch, rng.next());
          for (double& v : p.values()) v += rng.uniform(-0.3, 0.3);
          const VertexBatch batch = toy_batch(random_toy(5, rng), 3);
          const Gradients grad = backward(p, batch);
          InrParams probe = p;
          constexpr double eps = 1e-5;
          for (std::size_t i = 0; i < p.size(); ++i) {
            const double x = p.values()[i];
            probe.values()[i] = x + eps;
            const double up = batch_loss(probe, batch);
            probe.values()[i] = x - eps;
            const double down = batch_loss(probe, batch);
            probe.values()[i] = x;
            const double numeric = (up - down) / (2 * eps);
            const double scale = std::max({std::abs(numeric), std::abs(grad.values[i]), 1e-6});
            worst = std::max(worst, std::abs(numeric - grad.values[i]) / scale);
          }
          ++nets;
        }
      }
    }
  }
  return {worst < 1e-4, fmt("%d nets, max relative error %.3e (limit 1e-4)", nets, worst)};
}

// A2

Outcome subdivision_law() {
  const std::vector<Mesh> meshes{testing::single_triangle(), testing::cube(), testing::icosphere(1),
                                 testing::torus(8, 5), testing::grid(4)};
  bool ok = true;
  int cases = 0;
  for (const Mesh& m : meshes) {
    for (int s = 0; s <= 4; ++s) {
      const SubdividedMesh a = midpoint_subdivide(m, s);
      const SubdividedMesh b = midpoint_subdivide(m, s);
      ok &= a.mesh.num_faces() == (m.num_faces() << (2 * s));
      ok &= a.mesh.vertices() == b.mesh.vertices() && a.mesh.faces() == b.mesh.faces();
      ++cases;
    }
  }
  return {ok, fmt("%d mesh/level cases, face counts exact and runs bit-identical: %s", cases, ok ? "yes" : "no")};
}

// A3

std::vector<SurfacePoint> random_coarse_points(const Mesh& coarse, std::size_t n, std::uint64_t seed) {
  std::vector<SurfacePoint> pts;
  for (const SampledPoint& s : sample_surface(coarse, n, seed)) pts.push_back({s.face, s.bary});
  return pts;
}

Outcome ssp_soundness() {
  const Mesh grid = testing::grid(33);
  const DecimationResult g = qslim_decimate_with_ssp(grid, 100);
  double plane = 0.0;
  for (const SurfacePoint& p : random_coarse_points(g.coarse, 10000, 1)) {
    plane = std::max(plane, std::abs(g.map.map_point(p).z()));
  }

  const Mesh sphere = testing::icosphere(4);
  const DecimationResult s = qslim_decimate_with_ssp(sphere, 500);
  const SpatialIndex index(sphere);
  double surface = 0.0;
  for (const SurfacePoint& p : random_coarse_points(s.coarse, 10000, 2)) {
    surface = std::max(surface, index.closest_point(s.map.map_point(p)).distance);
  }
  const bool euler = euler_characteristic(s.coarse) == euler_characteristic(sphere);
  const bool grid_target = g.coarse.num_vertices() == 100;
  const bool ok = grid_target && plane < 1e-5 && sphere.num_vertices() == 2562 && s.coarse.num_vertices() == 500 &&
                  surface < 1e-4 && euler;
  return {ok, fmt("grid %zu -> %zu of 100 requested, plane deviation %.2e (limit 1e-5); icosphere %zu -> %zu, "
                  "surface distance %.2e (limit 1e-4), Euler preserved: %s",
                  grid.num_vertices(), g.coarse.num_vertices(), plane, sphere.num_vertices(), s.coarse.num_vertices(),
                  surface, euler ? "yes" : "no")};
}

// A4

Outcome pruning_schedule() {
  const Architecture arch{10, 8, 32, 4};
  InrParams p = InrParams::initialize(arch, 3);
  SparsityMask mask(p);
  for (int step = 0; step < 5; ++step) l1_prune_step(p, mask, 0.87);
  const double keep = mask.keep_fraction();

  Rng rng(4);
  const VertexBatch batch = toy_batch(random_toy(64, rng), arch.frequencies);
  AdamWState state(p.size());
  std::size_t violations = 0;
  for (int step = 0; step < 100; ++step) {
    const Gradients g = backward(p, batch);
    adamw_step(p.values(), g.values, state, {}, mask.flags());
    for (std::size_t i = 0; i < p.size(); ++i) violations += mask.masked(i) && p.values()[i] != 0.0;
  }
  const bool ok = keep >= 0.49 && keep <= 0.51 && violations == 0;
  return {ok, fmt("S = %.4f (range [0.49, 0.51]), non-zero masked entries over 100 steps: %zu", keep, violations)};
}

// A5

Outcome quantization_bound() {
  const Architecture arch{3, 3, 12, 2};
  Rng rng(5);
  std::size_t tensors = 0, violations = 0, code_changes = 0;
  double worst_ratio = 0.0;
  while (tensors < 1000) {
    InrParams p(arch);
    for (const TensorInfo& t : p.tensors()) {
      const double lo = rng.uniform(-5, 1), hi = lo + rng.uniform(1e-3, 6);
      const bool sparse = rng.below(3) == 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        p.values()[t.offset + i] = sparse && rng.below(2) == 0 ? 0.0 : rng.uniform(lo, hi);
      }
    }
    const QuantizedModel q = quantize_weights(p);
    const InrParams back = dequantize(q);
    for (std::size_t t = 0; t < q.tensors.size(); ++t) {
      const TensorInfo& info = p.tensors()[t];
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t i = 0; i < info.size(); ++i) {
        lo = std::min(lo, p.values()[info.offset + i]);
        hi = std::max(hi, p.values()[info.offset + i]);
      }
      const double bound = (static_cast<double>(q.tensors[t].max) - q.tensors[t].min) / 510.0;
      for (std::size_t i = 0; i < info.size(); ++i) {
        const double err = std::abs(back.values()[info.offset + i] - p.values()[info.offset + i]);
        if (err > bound * (1 + 1e-12)) ++violations;
        if (hi > lo) worst_ratio = std::max(worst_ratio, err / ((hi - lo) / 510.0));
      }
      ++tensors;
    }
    const QuantizedModel again = quantize_weights(back);
    code_changes += again.payload() != q.payload();
  }
  const bool ok = violations == 0 && code_changes == 0;
  return {ok, fmt("%zu tensors, bound violations %zu, worst error %.4f half-steps of the data range, "
                  "re-quantization mismatches %zu",
                  tensors, violations, worst_ratio, code_changes)};
}

// A6

Outcome entropy_coding() {
  Rng rng(6);
  std::size_t failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(4096);
    const std::uint64_t alphabet = 1 + rng.below(256);
    std::vector<std::uint8_t> bytes(n);
    for (auto& b : bytes) {
      const double u = rng.uniform();
      b = static_cast<std::uint8_t>(trial % 2 ? rng.below(alphabet) : static_cast<std::uint64_t>(u * u * alphabet));
    }
    failures += huffman_decode(huffman_encode(bytes)) != bytes;
  }

  const Architecture arch{10, 8, 32, 4};
  InrParams p = InrParams::initialize(arch, 6);
  SparsityMask mask(p);
  prune_to_count(p, mask, mask.prunable() / 2);
  const std::vector<std::uint8_t> stream = quantize_weights(p).payload();
  const HuffmanStream coded = huffman_encode(stream);
  const bool exact = huffman_decode(coded) == stream;
  const double bps = coded.bits_per_symbol(stream.size());
  const bool ok = failures == 0 && exact && bps < 8.0;
  return {ok, fmt("random arrays failing round trip: %zu/1000; half-zero weight stream (%zu bytes) round trip %s at "
                  "%.3f bits/symbol (limit 8)",
                  failures, stream.size(), exact ? "exact" : "BROKEN", bps)};
}

// A7, A8, A11, A12 share the desk-scale encode.

const Mesh& asset() {
  static const Mesh m = testing::displaced_sphere_asset();
  return m;
}

constexpr std::size_t kMetricSamples = 200'000;

EncodeOptions desk_options(int epochs) {
  EncodeOptions o;
  o.coarse_vertices = 500;
  o.levels = 2;
  o.train.arch = Architecture{10, 8, 32, 4};
  o.train.epochs = epochs;
  o.metrics = {kMetricSamples, 0, 0, NormalPolicy::Face};
  return o;
}

struct DeskRun {
  EncodeResult result;
  double seconds = 0.0;
};

const DeskRun& desk_run(int epochs) {
  static std::vector<std::pair<int, DeskRun>> cache;
  for (const auto& [e, run] : cache) {
    if (e == epochs) return run;
  }
  const auto t0 = std::chrono::steady_clock::now();
  DeskRun run{encode(asset(), desk_options(epochs)), 0.0};
  run.seconds = seconds_since(t0);
  cache.emplace_back(epochs, std::move(run));
  return cache.back().second;
}

QualityReport decoded_quality(const CompressedContainer& c, const PreparedMesh& p) {
  return evaluate_quality(p.normalized, decode_normalized(c), {kMetricSamples, 0, 0, NormalPolicy::Face});
}

Outcome desk_scale() {
  const DeskRun& run = desk_run(500);
  const EncodeReport& r = run.result.report;
  const std::vector<std::uint8_t> bytes = serialize_container(run.result.container);
  const auto t0 = std::chrono::steady_clock::now();
  const Mesh decoded = decode(parse_container(bytes));
  const double decode_seconds = seconds_since(t0);
  const double ratio = static_cast<double>(bytes.size()) / (r.raw_bits / 8.0);
  const double factor = r.reconstruction.d_pm / r.ssp_gt.d_pm;
  const bool ok = ratio <= 0.25 && factor <= 2.0 && decode_seconds < 5.0 && decoded.num_faces() == r.subdivided_faces;
  return {ok, fmt("%zu faces -> %zu bytes, ratio %.4f (limit 0.25); decoded d_pm %.3e vs SSP-GT %.3e = %.2fx "
                  "(limit 2x); decode %.2f s (limit 5); encode %.0f s",
                  r.input_faces, bytes.size(), ratio, r.reconstruction.d_pm, r.ssp_gt.d_pm, factor, decode_seconds,
                  run.seconds)};
}

Outcome quantization_cost() {
  const DeskRun& run = desk_run(500);
  const PreparedMesh& p = run.result.prepared;
  const InrParams& w = run.result.training.params;
  const QualityReport quant = decoded_quality(package_model(p, w, {true, true, true}), p);
  const QualityReport flt = decoded_quality(package_model(p, w, {true, false, true}), p);
  const double dpm = quant.d_pm - flt.d_pm, dnorm = quant.d_norm - flt.d_norm;
  const bool ok = dpm <= 3e-4 && dnorm <= 1.5;
  return {ok, fmt("quantized d_pm %.4e vs float %.4e, delta %.2e (limit 3e-4); d_norm %.3f vs %.3f deg, delta %.3f "
                  "(limit 1.5)",
                  quant.d_pm, flt.d_pm, dpm, quant.d_norm, flt.d_norm, dnorm)};
}

Outcome ablation_trends() {
  const std::vector<std::size_t> sizes{250, 500, 1000};
  const std::vector<int> levels{1, 2, 3};
  const std::vector<AblationCell> cells =
      ablate_remesh(asset(), sizes, levels, {kMetricSamples, 0, 0, NormalPolicy::Face});
  auto cell = [&](std::size_t v, int s) -> const AblationCell& {
    return *std::find_if(cells.begin(), cells.end(),
                         [&](const AblationCell& c) { return c.target_coarse_vertices == v && c.levels == s; });
  };
  bool ok = std::all_of(cells.begin(), cells.end(), [](const AblationCell& c) { return c.error.empty(); });
  std::string violations;
  for (std::size_t v : sizes) {
    for (std::size_t i = 1; i < levels.size(); ++i) {
      if (cell(v, levels[i]).d_pm > cell(v, levels[i - 1]).d_pm) {
        ok = false;
        violations += fmt(" s-trend at V=%zu s=%d;", v, levels[i]);
      }
    }
  }
  for (int s : {2, 3}) {
    for (std::size_t i = 1; i < sizes.size(); ++i) {
      if (cell(sizes[i], s).d_pm > cell(sizes[i - 1], s).d_pm) {
        ok = false;
        violations += fmt(" V-trend at s=%d V=%zu;", s, sizes[i]);
      }
    }
  }
  // Roughly equal remeshed vertex counts: 4x the coarse vertices at one level fewer.
  for (int s : {2, 3}) {
    if (cell(1000, s - 1).d_pm > cell(250, s).d_pm) {
      ok = false;
      violations += fmt(" matched count V=1000 s=%d vs V=250 s=%d;", s - 1, s);
    }
  }
  std::string table;
  for (const AblationCell& c : cells) table += fmt(" (%zu,%d)=%.3e", c.target_coarse_vertices, c.levels, c.d_pm);
  return {ok, "d_pm" + table + (violations.empty() ? std::string("; all trends hold") : ";" + violations)};
}

Outcome container_integrity() {
  const DeskRun& run = desk_run(500);
  const CompressedContainer& c = run.result.container;
  const std::vector<std::uint8_t> bytes = serialize_container(c);
  const bool round_trip = parse_container(bytes) == c && serialize_container(parse_container(bytes)) == bytes;
  const Mesh a = decode(parse_container(bytes));
  const Mesh b = decode(parse_container(bytes));
  const bool deterministic = a.vertices() == b.vertices() && a.faces() == b.faces();

  const PreparedMesh& p = run.result.prepared;
  const CompressedContainer npqc = package_model(p, run.result.training.params, {false, false, false});
  const std::size_t npqc_bytes = serialize_container(npqc).size();
  const double compressed_dpm = decoded_quality(c, p).d_pm;
  const double npqc_dpm = decoded_quality(npqc, p).d_pm;
  const bool ok = round_trip && deterministic && npqc_bytes > bytes.size() && npqc_dpm <= compressed_dpm;
  return {ok, fmt("round trip %s, decode %s; uncompressed-weights container %zu bytes vs %zu, d_pm %.4e vs %.4e",
                  round_trip ? "bit-exact" : "MISMATCH", deterministic ? "bit-identical" : "NON-DETERMINISTIC",
                  npqc_bytes, bytes.size(), npqc_dpm, compressed_dpm)};
}

Outcome metric_exactness() {
  const Mesh m = testing::noisy_icosphere(3, 0.1, 1, 4, 6, 21);
  const SpatialIndex index(m);
  Rng rng(10);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 q(rng.uniform(-1.6, 1.6), rng.uniform(-1.6, 1.6), rng.uniform(-1.6, 1.6));
    worst = std::max(worst, std::abs(index.closest_point(q).distance - closest_point_brute_force(m, q).distance));
  }
  const double self = d_pm(m, m, {50000, 1, 0, NormalPolicy::Face});

  auto centered = [](const Mesh& g, double z) {
    std::vector<Vec3> v = g.vertices();
    for (Vec3& p : v) p += Vec3(-0.5, -0.5, z);
    return Mesh(std::move(v), g.faces());
  };
  const double h = 0.01;
  const Mesh plane = centered(testing::grid(11), 0.0);
  const double planes = d_pm(plane, centered(testing::grid(11), h), {50000, 1, 0, NormalPolicy::Face});
  const double angle = d_norm(plane, testing::rotate(plane, Vec3::UnitX(), 10.0), {50000, 7, 0, NormalPolicy::Face});
  const bool ok = worst < 1e-9 && self < 1e-9 && std::abs(planes - 2 * h) < 0.02 * 2 * h && std::abs(angle - 10.0) < 0.2;
  return {ok, fmt("BVH vs brute force max diff %.1e; d_pm(a,a) %.1e; parallel planes %.5f (expect %.3f +-2%%); "
                  "rotated plane %.3f deg (expect 10 +-0.2)",
                  worst, self, planes, 2 * h, angle)};
}

Outcome epoch_monotonicity() {
  const EncodeReport& short_run = desk_run(500).result.report;
  const DeskRun& long_run = desk_run(1500);
  const double a = short_run.reconstruction.d_pm, b = long_run.result.report.reconstruction.d_pm;
  return {b <= a, fmt("d_pm after 1500 epochs %.4e vs 500 epochs %.4e; 1500-epoch encode %.0f s", b, a, long_run.seconds)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", gradient_check},      {"A2", subdivision_law},    {"A3", ssp_soundness},
      {"A4", pruning_schedule},    {"A5", quantization_bound}, {"A6", entropy_coding},
      {"A7", desk_scale},          {"A8", quantization_cost},  {"A9", ablation_trends},
      {"A10", metric_exactness},   {"A11", container_integrity}, {"A12", epoch_monotonicity},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%-3s %s  %s  [%.1f s]\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
