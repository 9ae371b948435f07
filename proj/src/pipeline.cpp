#include "nmc/pipeline.hpp"

#include <bit>
#include <chrono>
#include <memory>
#include <sstream>

#include "nmc/error.hpp"
#include "nmc/quantize.hpp"

namespace nmc {
namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

NormalizationTransform float_exact(NormalizationTransform t) {
  for (int i = 0; i < 3; ++i) t.translation[i] = static_cast<float>(t.translation[i]);
  t.scale = static_cast<float>(t.scale);
  return t;
}

Mesh round_to_float(const Mesh& m) {
  std::vector<Vec3> v = m.vertices();
  for (Vec3& p : v) p = p.cast<float>().cast<double>();
  return Mesh(std::move(v), m.faces());
}

}  // namespace

PreparedMesh prepare_mesh(const Mesh& mesh, std::size_t coarse_vertices, int levels, const DecimateOptions& decimate) {
  PreparedMesh p;
  stage("validate", [&] {
    if (mesh.empty() || mesh.num_faces() == 0) throw MeshError("input mesh is empty");
    const ManifoldReport report = validate_edge_manifold(mesh);
    if (!report.is_edge_manifold) {
      const EdgeKey e = report.non_manifold_edges.front();
      std::ostringstream msg;
      msg << "input is not edge-manifold: " << report.non_manifold_edges.size()
          << " edge(s) shared by more than two faces, first (" << e.a << ", " << e.b << ")";
      throw MeshError(msg.str());
    }
    if (levels < 0 || levels > kMaxSubdivisionLevel) throw MeshError("subdivision level out of range");
    return 0;
  });
  stage("normalize", [&] {
    p.transform = float_exact(normalize_unit_bbox(mesh).transform);
    p.normalized = apply_transform(mesh, p.transform);
    const auto degenerate = find_degenerate_faces(p.normalized);
    if (!degenerate.empty()) {
      throw MeshError(std::to_string(degenerate.size()) + " degenerate face(s), first " + std::to_string(degenerate.front()));
    }
    return 0;
  });
  stage("decimate", [&] {
    p.decimation = qslim_decimate_with_ssp(p.normalized, coarse_vertices, decimate);
    p.warnings = p.decimation.warnings;
    p.coarse = round_to_float(p.decimation.coarse);
    return 0;
  });
  stage("subdivide", [&] {
    p.subdivided = midpoint_subdivide(p.coarse, levels);
    return 0;
  });
  stage("bake", [&] {
    p.training = bake_training_set(p.subdivided, p.decimation.map);
    return 0;
  });
  return p;
}

CompressedContainer package_model(const PreparedMesh& prepared, const InrParams& params, const CodecOptions& codec) {
  CompressedContainer c;
  c.arch = params.architecture();
  c.levels = prepared.subdivided.level;
  c.transform = {static_cast<float>(prepared.transform.translation.x()),
                 static_cast<float>(prepared.transform.translation.y()),
                 static_cast<float>(prepared.transform.translation.z()), static_cast<float>(prepared.transform.scale)};
  for (const Vec3& v : prepared.coarse.vertices()) {
    for (int i = 0; i < 3; ++i) c.coarse_positions.push_back(static_cast<float>(v[i]));
  }
  for (const Face& f : prepared.coarse.faces()) c.coarse_indices.insert(c.coarse_indices.end(), f.begin(), f.end());

  std::vector<std::uint8_t> payload = stage("quantize", [&] {
    std::vector<std::uint8_t> bytes;
    if (codec.quantize) {
      const QuantizedModel q = quantize_weights(params);
      for (const QuantizedTensor& t : q.tensors) c.ranges.emplace_back(t.min, t.max);
      bytes = q.payload();
    } else {
      bytes.reserve(params.size() * 4);
      for (double x : params.values()) {
        const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(x));
        for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
      }
    }
    return bytes;
  });
  c.flags = static_cast<std::uint8_t>((codec.quantize ? kFlagQuantized : 0) | (codec.entropy_code ? kFlagEntropyCoded : 0) |
                                      (codec.prune ? kFlagPruned : 0));
  c.stream = stage("entropy", [&] {
    if (codec.entropy_code) return huffman_encode(payload);
    HuffmanStream raw;
    raw.bit_count = static_cast<std::uint64_t>(payload.size()) * 8;
    raw.payload = std::move(payload);
    return raw;
  });
  return c;
}

Mesh decode_normalized(const CompressedContainer& c, unsigned threads) {
  const InrParams params = stage("dequantize", [&] { return container_params(c); });
  const SubdividedMesh sub = stage("subdivide", [&] { return midpoint_subdivide(c.coarse_mesh(), c.levels); });
  return stage("inference", [&] {
    const TrainingSet hood = make_vertex_set(sub.mesh);
    const VertexBatch all = encode_training_set(hood, c.arch.frequencies, false);
    const std::vector<Vec3> disp = predict(params, all, threads);
    std::vector<Vec3> v(disp.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = hood.positions[i] + disp[i];
    return Mesh(std::move(v), sub.mesh.faces());
  });
}

Mesh decode(const CompressedContainer& c, unsigned threads) {
  return invert_transform(decode_normalized(c, threads), c.normalization());
}

EncodeResult encode(const Mesh& mesh, const EncodeOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  EncodeResult out;
  EncodeReport& r = out.report;
  stage("configure", [&] {
    options.train.arch.validate();
    if (options.train.epochs < 1) throw std::invalid_argument("epoch count must be positive");
    return 0;
  });
  const PruneSchedule schedule = stage("configure", [&] {
    if (!options.codec.prune) return PruneSchedule{};
    std::vector<int> epochs = options.prune_epochs.empty()
                                  ? scaled_prune_epochs(options.train.epochs, options.prune_steps)
                                  : options.prune_epochs;
    const auto steps = static_cast<int>(epochs.size());
    PruneSchedule s = prune_schedule(options.prune_target, steps, std::move(epochs));
    if (s.active() && s.epochs.back() > options.train.epochs) {
      throw std::invalid_argument("pruning epoch " + std::to_string(s.epochs.back()) + " exceeds the " +
                                  std::to_string(options.train.epochs) + " training epochs");
    }
    return s;
  });

  out.prepared = prepare_mesh(mesh, options.coarse_vertices, options.levels, options.decimate);
  const PreparedMesh& p = out.prepared;
  r.prepare_seconds = seconds_since(t0);
  r.warnings = p.warnings;
  r.input_vertices = mesh.num_vertices();
  r.input_faces = mesh.num_faces();
  r.coarse_vertices = p.coarse.num_vertices();
  r.coarse_faces = p.coarse.num_faces();
  r.subdivided_vertices = p.subdivided.mesh.num_vertices();
  r.subdivided_faces = p.subdivided.mesh.num_faces();

  const auto t1 = std::chrono::steady_clock::now();
  out.training = stage("train", [&] { return train(p.training, options.train, schedule, options.on_epoch); });
  r.train_seconds = seconds_since(t1);
  r.parameters = out.training.params.size();
  r.initial_loss = out.training.initial_loss;
  r.final_loss = out.training.final_loss;
  r.keep_fraction = out.training.mask.keep_fraction();

  out.container = package_model(p, out.training.params, options.codec);
  stage("serialize", [&] {
    r.sizes = container_sizes(out.container);
    return 0;
  });
  r.raw_bits = raw_size_bits(mesh);
  r.ratio = static_cast<double>(r.sizes.total) * 8.0 / r.raw_bits;

  if (options.measure_ssp_gt) {
    r.ssp_gt = stage("evaluate", [&] { return ssp_gt_quality(p.subdivided, p.training, p.normalized, options.metrics); });
    r.has_ssp_gt = true;
  }
  if (options.measure_reconstruction) {
    r.reconstruction = stage("evaluate", [&] {
      return evaluate_quality(p.normalized, decode_normalized(out.container, options.metrics.threads), options.metrics);
    });
    r.has_reconstruction = true;
  }
  r.total_seconds = seconds_since(t0);
  return out;
}

}  // namespace nmc
