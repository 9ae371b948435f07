#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "meshes.hpp"
#include "nmc/ablate.hpp"
#include "nmc/container.hpp"
#include "nmc/error.hpp"
#include "nmc/pipeline.hpp"
#include "nmc/prune.hpp"
#include "nmc/rng.hpp"

using namespace nmc;

namespace {

Architecture small_arch() {
  Architecture a;
  a.frequencies = 4;
  a.hidden_layers = 3;
  a.width = 16;
  a.ring_layers = 2;
  return a;
}

const PreparedMesh& prepared() {
  static const PreparedMesh p = prepare_mesh(
      testing::scale(testing::noisy_icosphere(3, 0.05, 1, 3, 6, 9), 4.0), 100, 2);
  return p;
}

// Random weights pruned to half, standing in for a trained network.
InrParams pruned_params(std::uint64_t seed) {
  InrParams p = InrParams::initialize(small_arch(), seed);
  for (double& x : p.values()) x *= 0.05;
  SparsityMask mask(p);
  prune_to_count(p, mask, mask.prunable() / 2);
  return p;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("nmc_unit_" + name);
}

}  // namespace

TEST_CASE("container round trip") {
  for (const CodecOptions codec : {CodecOptions{}, CodecOptions{false, false, false}, CodecOptions{true, true, false},
                                   CodecOptions{false, false, true}}) {
    const CompressedContainer c = package_model(prepared(), pruned_params(1), codec);
    const std::vector<std::uint8_t> bytes = serialize_container(c);
    const CompressedContainer back = parse_container(bytes);
    CHECK(back == c);
    CHECK(serialize_container(back) == bytes);
    CHECK(container_sizes(c).total == bytes.size());
    CHECK(back.quantized() == codec.quantize);
    CHECK(back.entropy_coded() == codec.entropy_code);
    CHECK(back.pruned() == codec.prune);
  }
}

TEST_CASE("container file layout") {
  const CompressedContainer c = package_model(prepared(), pruned_params(2), {});
  const std::vector<std::uint8_t> bytes = serialize_container(c);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NMC1");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 4);  // Q
  CHECK(bytes[6] == 3);  // l
  CHECK(bytes[7] == 16);  // k
  CHECK(bytes[8] == 2);  // g
  CHECK(bytes[9] == 2);  // s
  const ContainerSizes s = container_sizes(c);
  // Vertex and face counts follow the codec byte, little-endian.
  const std::size_t v = bytes[s.header + 1] | (bytes[s.header + 2] << 8) | (bytes[s.header + 3] << 16);
  CHECK(v == c.coarse_vertex_count());
  CHECK(s.quant_metadata == 8 * tensor_layout(small_arch()).size());
  CHECK(s.coarse == 9 + 12 * c.coarse_vertex_count() + 12 * c.coarse_face_count());

  const auto path = temp_path("layout.nmc");
  write_container(path, c);
  CHECK(std::filesystem::file_size(path) == inspect(c).sizes.total);
  CHECK(read_container(path) == c);
  std::filesystem::remove(path);
}

TEST_CASE("malformed containers are rejected") {
  const CompressedContainer c = package_model(prepared(), pruned_params(3), {});
  const std::vector<std::uint8_t> bytes = serialize_container(c);
  for (std::size_t cut = 0; cut < bytes.size(); cut += 1 + cut / 8) {
    CHECK_THROWS_AS(parse_container(std::span(bytes).first(cut)), FormatError);
  }
  std::vector<std::uint8_t> longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_AS(parse_container(longer), FormatError);
  std::vector<std::uint8_t> magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(parse_container(magic), FormatError);
  std::vector<std::uint8_t> version = bytes;
  version[4] = 2;
  CHECK_THROWS_AS(parse_container(version), FormatError);
  std::vector<std::uint8_t> levels = bytes;
  levels[9] = 40;
  CHECK_THROWS_AS(parse_container(levels), FormatError);

  // A header claiming a wider network than the payload holds.
  CompressedContainer wider = c;
  wider.arch.width = 17;
  wider.ranges.assign(tensor_layout(wider.arch).size(), {-1.0f, 1.0f});
  CHECK_THROWS_AS(decode_payload(wider), FormatError);
  CHECK_THROWS_AS(inspect(wider), FormatError);
  CHECK_THROWS_AS(decode(wider), PipelineError);

  CompressedContainer empty = c;
  empty.stream = HuffmanStream{};
  CHECK_THROWS_AS(inspect(empty), FormatError);
}

TEST_CASE("inspect reports sizes and sparsity") {
  const InrParams params = pruned_params(4);
  const CompressedContainer full = package_model(prepared(), params, {});
  const CompressedContainer quant_only = package_model(prepared(), params, {false, true, false});
  const CompressedContainer raw = package_model(prepared(), params, {false, false, false});
  const InspectReport r = inspect(full);
  CHECK(r.parameters == parameter_count(small_arch()));
  CHECK(r.decoded_faces == 16 * prepared().coarse.num_faces());
  CHECK(r.coarse_vertices == prepared().coarse.num_vertices());
  CHECK(r.weight_sparsity == doctest::Approx(0.5).epsilon(0.02));
  CHECK(r.bits_per_symbol < 8.0);
  CHECK(inspect(raw).weight_sparsity == doctest::Approx(0.5).epsilon(0.02));
  CHECK(inspect(raw).sizes.payload == 4 * r.parameters);
  CHECK(inspect(quant_only).sizes.payload == r.parameters);
  // Each codec stage shrinks the network bytes.
  CHECK(r.sizes.payload < inspect(quant_only).sizes.payload);
  CHECK(inspect(quant_only).sizes.payload < inspect(raw).sizes.payload);
  CHECK(r.sizes.total < inspect(raw).sizes.total);
}

TEST_CASE("decoding") {
  const CompressedContainer c = package_model(prepared(), pruned_params(5), {});
  const Mesh a = decode(c, 1);
  const Mesh b = decode(c, 4);
  CHECK(a.vertices() == b.vertices());
  CHECK(a.faces() == b.faces());
  CHECK(a.num_faces() == 16 * c.coarse_face_count());
  CHECK(decode(parse_container(serialize_container(c))).vertices() == a.vertices());

  const Mesh normalized = decode_normalized(c);
  const Mesh back = invert_transform(normalized, c.normalization());
  for (std::size_t i = 0; i < a.num_vertices(); ++i) CHECK((back.vertices()[i] - a.vertices()[i]).norm() < 1e-12);

  // The encoder's in-memory reconstruction matches the decoder's.
  const InrParams deq = container_params(c);
  const VertexBatch all = encode_training_set(prepared().training, small_arch().frequencies, false);
  const std::vector<Vec3> disp = predict(deq, all);
  for (std::size_t i = 0; i < disp.size(); ++i) {
    const Vec3 expected = prepared().subdivided.mesh.vertices()[i] + disp[i];
    CHECK((normalized.vertices()[i] - expected).norm() < 1e-6);
  }
}

TEST_CASE("zero network decodes to the subdivided coarse mesh") {
  InrParams zeros(small_arch());
  std::fill(zeros.values().begin(), zeros.values().end(), 0.0);
  const CompressedContainer c = package_model(prepared(), zeros, {});
  const Mesh m = decode_normalized(c);
  REQUIRE(m.num_vertices() == prepared().subdivided.mesh.num_vertices());
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    CHECK((m.vertices()[i] - prepared().subdivided.mesh.vertices()[i]).norm() < 1e-12);
  }
}

TEST_CASE("prepare rejects bad input with a stage tag") {
  auto stage_of = [](auto&& fn) -> std::string {
    try {
      fn();
    } catch (const PipelineError& e) {
      return e.stage();
    }
    return "";
  };
  const Mesh non_manifold({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1)},
                          {Face{0, 1, 2}, Face{1, 0, 3}, Face{0, 1, 4}});
  CHECK(stage_of([&] { prepare_mesh(non_manifold, 3, 1); }) == "validate");
  CHECK(stage_of([&] { prepare_mesh(Mesh{}, 3, 1); }) == "validate");
  CHECK(stage_of([&] { prepare_mesh(testing::icosphere(2), 50, 12); }) == "validate");

  std::vector<Vec3> v = testing::icosphere(2).vertices();
  std::vector<Face> f = testing::icosphere(2).faces();
  v.push_back(Vec3(3, 0, 0));
  v.push_back(Vec3(4, 0, 0));
  v.push_back(Vec3(5, 0, 0));
  f.push_back(Face{static_cast<std::uint32_t>(v.size() - 3), static_cast<std::uint32_t>(v.size() - 2),
                   static_cast<std::uint32_t>(v.size() - 1)});
  CHECK(stage_of([&] { prepare_mesh(Mesh(v, f), 50, 1); }) == "normalize");

  EncodeOptions opts;
  opts.coarse_vertices = 100;
  opts.levels = 1;
  opts.train.arch = small_arch();
  opts.train.epochs = 0;
  CHECK(stage_of([&] { encode(testing::icosphere(3), opts); }) == "configure");
  opts.train.epochs = 5;
  opts.prune_epochs = {2, 4, 6, 8, 10};
  CHECK(stage_of([&] { encode(testing::icosphere(3), opts); }) == "configure");
}

TEST_CASE("end-to-end encode") {
  const Mesh input = testing::scale(testing::noisy_icosphere(3, 0.05, 1, 3, 6, 9), 4.0);
  EncodeOptions opts;
  opts.coarse_vertices = 100;
  opts.levels = 2;
  opts.train = {};
  opts.train.arch = small_arch();
  opts.train.epochs = 20;
  opts.train.batch_size = 256;
  opts.metrics.samples = 20000;
  const EncodeResult r = encode(input, opts);
  const EncodeReport& rep = r.report;
  CHECK(rep.input_vertices == input.num_vertices());
  CHECK(rep.coarse_vertices == 100);
  CHECK(rep.subdivided_faces == 16 * rep.coarse_faces);
  CHECK(rep.parameters == parameter_count(small_arch()));
  CHECK(rep.sizes.total == serialize_container(r.container).size());
  CHECK(rep.ratio == doctest::Approx(static_cast<double>(rep.sizes.total) / (rep.raw_bits / 8.0)));
  CHECK(rep.keep_fraction == doctest::Approx(0.5).epsilon(0.01));
  CHECK(rep.final_loss < rep.initial_loss);
  REQUIRE(rep.has_ssp_gt);
  REQUIRE(rep.has_reconstruction);
  CHECK(rep.ssp_gt.d_pm > 0.0);
  CHECK(std::isfinite(rep.reconstruction.d_pm));
  CHECK(r.container.pruned());

  // Decoding lands back in the input frame.
  const Mesh decoded = decode(r.container);
  const BoundingBox in = bounding_box(input), out = bounding_box(decoded);
  CHECK((in.min - out.min).norm() < 0.2);
  CHECK((in.max - out.max).norm() < 0.2);
}

TEST_CASE("remeshing ablation") {
  const Mesh m = testing::noisy_icosphere(3, 0.05, 1, 3, 6, 2);
  const std::vector<AblationCell> cells = ablate_remesh(m, {60, 120}, {1, 2, -1}, {10000, 1, 0, NormalPolicy::Face});
  REQUIRE(cells.size() == 6);
  for (const AblationCell& c : cells) {
    if (c.levels < 0) {
      CHECK_FALSE(c.error.empty());
      continue;
    }
    CHECK(c.error.empty());
    CHECK(c.coarse_vertices == c.target_coarse_vertices);
    CHECK(c.d_pm > 0.0);
  }
  CHECK(cells[1].d_pm <= cells[0].d_pm);
  CHECK(cells[4].d_pm <= cells[3].d_pm);
  CHECK(cells[1].subdivided_faces == 4 * cells[0].subdivided_faces);
  std::ostringstream csv;
  write_ablation_csv(csv, cells);
  const std::string text = csv.str();
  CHECK(text.rfind("coarse_target,levels,coarse_vertices,subdivided_vertices,subdivided_faces,d_pm,d_norm,error\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);
}
