#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nmc/ablate.hpp"
#include "nmc/container.hpp"
#include "nmc/error.hpp"
#include "nmc/mesh_io.hpp"
#include "nmc/metrics.hpp"
#include "nmc/pipeline.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitGate = 1;
constexpr int kExitUsage = 2;
constexpr int kExitPipeline = 3;

struct Preset {
  std::size_t coarse_vertices;
  int levels;
  int layers;
  int width;
};

const std::map<std::string, Preset>& presets() {
  static const std::map<std::string, Preset> table{
      {"85kb", {2000, 2, 20, 56}},
      {"130kb", {2500, 2, 24, 70}},
      {"187kb", {3000, 3, 28, 82}},
      {"260kb", {3500, 3, 32, 96}},
  };
  return table;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json quality_json(const nmc::QualityReport& q) {
  return {{"d_pm", q.d_pm},         {"d_a_to_b", q.d_a_to_b},
          {"d_b_to_a", q.d_b_to_a}, {"d_norm", q.d_norm},
          {"samples", q.samples},   {"excluded_normals", q.excluded_normals}};
}

json sizes_json(const nmc::ContainerSizes& s) {
  return {{"header", s.header}, {"coarse", s.coarse},   {"quant_metadata", s.quant_metadata},
          {"table", s.table},   {"payload", s.payload}, {"total", s.total}};
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

struct GlobalOptions {
  bool json = false;
  unsigned threads = 0;
};

void apply_threads(const GlobalOptions& g) {
  if (g.threads > 0) setenv("NMC_THREADS", std::to_string(g.threads).c_str(), 1);
}

nmc::Mesh load_input(const std::string& path) {
  try {
    nmc::LoadResult r = nmc::load_mesh_with_warnings(path);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    return std::move(r.mesh);
  } catch (const nmc::PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw nmc::PipelineError("load", e.what());
  }
}

template <typename Fn>
auto io_stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const nmc::PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw nmc::PipelineError(name, e.what());
  }
}

struct EncodeArgs {
  std::string input, output;
  std::string preset = "85kb";
  std::optional<std::size_t> coarse;
  std::optional<int> levels, layers, width;
  int ring_layers = 4;
  int frequencies = 10;
  int epochs = 3500;
  std::size_t batch_size = 2048;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool no_prune = false, no_quant = false, no_ec = false, no_eval = false;
  std::size_t samples = 200'000;
  std::optional<double> max_dpm;
  std::string loss_csv;
  bool verbose = false;
};

int run_encode(const EncodeArgs& a, const GlobalOptions& g) {
  const Preset p = presets().at(a.preset);
  nmc::EncodeOptions o;
  o.coarse_vertices = a.coarse.value_or(p.coarse_vertices);
  o.levels = a.levels.value_or(p.levels);
  o.train.arch.frequencies = a.frequencies;
  o.train.arch.hidden_layers = a.layers.value_or(p.layers);
  o.train.arch.width = a.width.value_or(p.width);
  o.train.arch.ring_layers = a.ring_layers;
  o.train.epochs = a.epochs;
  o.train.batch_size = a.batch_size;
  o.train.lr0 = a.lr;
  o.train.seed = a.seed;
  o.codec = {!a.no_prune, !a.no_quant, !a.no_ec};
  o.measure_ssp_gt = !a.no_eval;
  o.measure_reconstruction = !a.no_eval;
  o.metrics.samples = a.samples;
  o.metrics.seed = a.seed;
  o.metrics.threads = g.threads;
  if (a.verbose) {
    o.on_epoch = [](const nmc::EpochStats& s) {
      std::cerr << "epoch " << s.epoch << " loss " << s.loss << " lr " << s.lr << " keep " << s.keep_fraction << '\n';
      return true;
    };
  }

  const nmc::Mesh mesh = load_input(a.input);
  const nmc::EncodeResult result = nmc::encode(mesh, o);
  io_stage("write", [&] {
    nmc::write_container(a.output, result.container);
    return 0;
  });
  if (!a.loss_csv.empty()) {
    io_stage("write", [&] {
      std::ofstream out(a.loss_csv);
      if (!out) throw std::runtime_error("cannot open " + a.loss_csv);
      nmc::write_loss_csv(out, result.training.history);
      return 0;
    });
  }
  const nmc::EncodeReport& r = result.report;
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';

  if (g.json) {
    json j{{"input_vertices", r.input_vertices},
           {"input_faces", r.input_faces},
           {"coarse_vertices", r.coarse_vertices},
           {"coarse_faces", r.coarse_faces},
           {"subdivided_vertices", r.subdivided_vertices},
           {"subdivided_faces", r.subdivided_faces},
           {"parameters", r.parameters},
           {"initial_loss", r.initial_loss},
           {"final_loss", r.final_loss},
           {"keep_fraction", r.keep_fraction},
           {"sizes", sizes_json(r.sizes)},
           {"raw_bytes", r.raw_bits / 8.0},
           {"ratio", r.ratio},
           {"prepare_seconds", r.prepare_seconds},
           {"train_seconds", r.train_seconds},
           {"total_seconds", r.total_seconds},
           {"warnings", r.warnings}};
    if (r.has_ssp_gt) j["ssp_gt"] = quality_json(r.ssp_gt);
    if (r.has_reconstruction) j["reconstruction"] = quality_json(r.reconstruction);
    print_json(j);
  } else {
    std::cout << "input        " << r.input_vertices << " vertices, " << r.input_faces << " faces\n"
              << "coarse       " << r.coarse_vertices << " vertices, " << r.coarse_faces << " faces\n"
              << "subdivided   " << r.subdivided_vertices << " vertices, " << r.subdivided_faces << " faces\n"
              << "parameters   " << r.parameters << " (keep " << r.keep_fraction << ")\n"
              << "loss         " << r.initial_loss << " -> " << r.final_loss << '\n'
              << "container    " << r.sizes.total << " bytes (" << r.sizes.total / nmc::kBytesPerKB << " KB)\n"
              << "raw          " << nmc::bits_to_bytes(r.raw_bits) << " bytes, ratio " << r.ratio << '\n';
    if (r.has_ssp_gt) {
      std::cout << "ssp gt       d_pm " << r.ssp_gt.d_pm * 1e4 << " x1e-4, d_norm " << r.ssp_gt.d_norm << " deg\n";
    }
    if (r.has_reconstruction) {
      std::cout << "decoded      d_pm " << r.reconstruction.d_pm * 1e4 << " x1e-4, d_norm " << r.reconstruction.d_norm << " deg\n";
    }
    std::cout << "time         " << r.total_seconds << " s (train " << r.train_seconds << " s)\n";
  }
  if (a.max_dpm && r.has_reconstruction && r.reconstruction.d_pm > *a.max_dpm) {
    std::cerr << "decoded d_pm " << r.reconstruction.d_pm << " exceeds " << *a.max_dpm << '\n';
    return kExitGate;
  }
  return kExitOk;
}

int run_decode(const std::string& input, const std::string& output, const GlobalOptions& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const nmc::CompressedContainer c = io_stage("read", [&] { return nmc::read_container(input); });
  const nmc::Mesh mesh = nmc::decode(c, g.threads);
  const double decode_seconds = seconds_since(t0);
  io_stage("write", [&] {
    nmc::save_mesh(output, mesh, nmc::format_for_path(output));
    return 0;
  });
  if (g.json) {
    print_json({{"vertices", mesh.num_vertices()}, {"faces", mesh.num_faces()}, {"decode_seconds", decode_seconds}});
  } else {
    std::cout << "decoded " << mesh.num_vertices() << " vertices, " << mesh.num_faces() << " faces in "
              << decode_seconds << " s\n";
  }
  return kExitOk;
}

struct EvalArgs {
  std::string a, b;
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  std::string normals = "face";
  bool normalize = false;
  std::optional<double> max_dpm, max_dnorm;
};

int run_eval(const EvalArgs& e, const GlobalOptions& g) {
  nmc::Mesh a = load_input(e.a);
  nmc::Mesh b = load_input(e.b);
  if (e.normalize) {
    // Both meshes go through the first one's transform so distances stay comparable.
    const nmc::NormalizationTransform t = nmc::normalize_unit_bbox(a).transform;
    a = nmc::apply_transform(a, t);
    b = nmc::apply_transform(b, t);
  }
  nmc::MetricOptions o;
  o.samples = e.samples;
  o.seed = e.seed;
  o.threads = g.threads;
  o.normals = e.normals == "smooth" ? nmc::NormalPolicy::Smooth : nmc::NormalPolicy::Face;
  const nmc::QualityReport q = io_stage("evaluate", [&] { return nmc::evaluate_quality(a, b, o); });
  const bool dpm_fail = e.max_dpm && q.d_pm > *e.max_dpm;
  const bool dnorm_fail = e.max_dnorm && q.d_norm > *e.max_dnorm;
  if (g.json) {
    json j = quality_json(q);
    j["pass"] = !(dpm_fail || dnorm_fail);
    print_json(j);
  } else {
    std::cout << "d_pm   " << q.d_pm * 1e4 << " x1e-4 (" << q.d_a_to_b * 1e4 << " + " << q.d_b_to_a * 1e4 << ")\n"
              << "d_norm " << q.d_norm << " deg\n"
              << "samples " << q.samples << " per direction, " << q.excluded_normals << " normals excluded\n";
  }
  if (dpm_fail) std::cerr << "d_pm " << q.d_pm << " exceeds " << *e.max_dpm << '\n';
  if (dnorm_fail) std::cerr << "d_norm " << q.d_norm << " exceeds " << *e.max_dnorm << '\n';
  return dpm_fail || dnorm_fail ? kExitGate : kExitOk;
}

int run_inspect(const std::string& input, const GlobalOptions& g) {
  const nmc::CompressedContainer c = io_stage("read", [&] { return nmc::read_container(input); });
  const nmc::InspectReport r = io_stage("inspect", [&] { return nmc::inspect(c); });
  if (g.json) {
    print_json({{"version", c.version},
                {"frequencies", c.arch.frequencies},
                {"hidden_layers", c.arch.hidden_layers},
                {"width", c.arch.width},
                {"ring_layers", c.arch.ring_layers},
                {"levels", c.levels},
                {"quantized", c.quantized()},
                {"entropy_coded", c.entropy_coded()},
                {"pruned", c.pruned()},
                {"sizes", sizes_json(r.sizes)},
                {"parameters", r.parameters},
                {"weights", r.weights},
                {"zero_weights", r.zero_weights},
                {"weight_sparsity", r.weight_sparsity},
                {"bits_per_symbol", r.bits_per_symbol},
                {"coarse_vertices", r.coarse_vertices},
                {"coarse_faces", r.coarse_faces},
                {"decoded_faces", r.decoded_faces}});
  } else {
    std::cout << "network     Q=" << c.arch.frequencies << " l=" << c.arch.hidden_layers << " k=" << c.arch.width
              << " g=" << c.arch.ring_layers << ", " << r.parameters << " parameters\n"
              << "codec       quantized=" << c.quantized() << " entropy_coded=" << c.entropy_coded()
              << " pruned=" << c.pruned() << '\n'
              << "coarse      " << r.coarse_vertices << " vertices, " << r.coarse_faces << " faces, s=" << c.levels
              << " -> " << r.decoded_faces << " faces\n"
              << "sparsity    " << r.zero_weights << " / " << r.weights << " weights (" << r.weight_sparsity << ")\n"
              << "entropy     " << r.bits_per_symbol << " bits/symbol\n"
              << "bytes       header " << r.sizes.header << ", coarse " << r.sizes.coarse << ", ranges "
              << r.sizes.quant_metadata << ", table " << r.sizes.table << ", payload " << r.sizes.payload
              << ", total " << r.sizes.total << '\n';
  }
  return kExitOk;
}

struct AblateArgs {
  std::string input;
  std::vector<std::size_t> sizes{250, 500, 1000};
  std::vector<int> levels{1, 2, 3};
  std::size_t samples = 200'000;
  std::uint64_t seed = 0;
  std::string csv;
};

int run_ablate(const AblateArgs& a, const GlobalOptions& g) {
  const nmc::Mesh mesh = load_input(a.input);
  nmc::MetricOptions o;
  o.samples = a.samples;
  o.seed = a.seed;
  o.threads = g.threads;
  const auto cells = io_stage("ablate", [&] { return nmc::ablate_remesh(mesh, a.sizes, a.levels, o); });
  if (!a.csv.empty()) {
    io_stage("write", [&] {
      std::ofstream out(a.csv);
      if (!out) throw std::runtime_error("cannot open " + a.csv);
      nmc::write_ablation_csv(out, cells);
      return 0;
    });
  }
  if (g.json) {
    json arr = json::array();
    for (const auto& c : cells) {
      arr.push_back({{"target_coarse_vertices", c.target_coarse_vertices},
                     {"levels", c.levels},
                     {"coarse_vertices", c.coarse_vertices},
                     {"subdivided_vertices", c.subdivided_vertices},
                     {"subdivided_faces", c.subdivided_faces},
                     {"d_pm", c.d_pm},
                     {"d_norm", c.d_norm},
                     {"error", c.error}});
    }
    print_json(arr);
  } else {
    nmc::write_ablation_csv(std::cout, cells);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural mesh codec: compress triangle meshes into a coarse mesh plus a displacement network"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_flag("--json", g.json, "Print reports as JSON");
  app.add_option("--threads", g.threads, "Worker thread cap (default: NMC_THREADS or all cores)");

  EncodeArgs enc;
  CLI::App* encode = app.add_subcommand("encode", "Compress a mesh into a container");
  encode->add_option("input", enc.input, "Input mesh (.obj or .ply)")->required()->check(CLI::ExistingFile);
  encode->add_option("output", enc.output, "Output container")->required();
  std::vector<std::string> preset_names;
  for (const auto& [name, _] : presets()) preset_names.push_back(name);
  encode->add_option("--preset", enc.preset, "Size preset: 85kb, 130kb, 187kb or 260kb")
      ->check(CLI::IsMember(preset_names))
      ->capture_default_str();
  encode->add_option("--coarse", enc.coarse, "Coarse vertex count (overrides preset)");
  encode->add_option("--levels", enc.levels, "Subdivision levels s (overrides preset)");
  encode->add_option("--layers", enc.layers, "Hidden layers l (overrides preset)");
  encode->add_option("--width", enc.width, "Hidden width k (overrides preset)");
  encode->add_option("--ring-layers", enc.ring_layers, "Layers with one-ring accumulation g")->capture_default_str();
  encode->add_option("--frequencies", enc.frequencies, "Positional encoding frequencies Q")->capture_default_str();
  encode->add_option("--epochs", enc.epochs, "Training epochs")->capture_default_str();
  encode->add_option("--batch-size", enc.batch_size, "Vertices per batch")->capture_default_str();
  encode->add_option("--lr", enc.lr, "Initial learning rate")->capture_default_str();
  encode->add_option("--seed", enc.seed, "Seed for initialization, shuffling and metric sampling")->capture_default_str();
  encode->add_flag("--no-prune", enc.no_prune, "Disable progressive pruning");
  encode->add_flag("--no-quant", enc.no_quant, "Store float32 weights instead of 8-bit codes");
  encode->add_flag("--no-ec", enc.no_ec, "Disable Huffman coding of the payload");
  CLI::Option* no_eval = encode->add_flag("--no-eval", enc.no_eval, "Skip the quality measurements");
  encode->add_option("--samples", enc.samples, "Surface samples per direction for the metrics")->capture_default_str();
  encode->add_option("--max-dpm", enc.max_dpm, "Exit with 1 if the decoded d_pm exceeds this")->excludes(no_eval);
  encode->add_option("--loss-csv", enc.loss_csv, "Write the per-epoch loss history here");
  encode->add_flag("-v,--verbose", enc.verbose, "Print every epoch to stderr");

  std::string dec_in, dec_out;
  CLI::App* decode = app.add_subcommand("decode", "Reconstruct a mesh from a container");
  decode->add_option("input", dec_in, "Container file")->required()->check(CLI::ExistingFile);
  decode->add_option("output", dec_out, "Output mesh (.ply binary by default, .obj by extension)")->required();

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "Compare two meshes with d_pm and d_norm");
  eval->add_option("mesh_a", ev.a, "Reference mesh")->required()->check(CLI::ExistingFile);
  eval->add_option("mesh_b", ev.b, "Test mesh")->required()->check(CLI::ExistingFile);
  eval->add_option("-n,--samples", ev.samples, "Samples per direction")->capture_default_str();
  eval->add_option("--seed", ev.seed, "Sampling seed")->capture_default_str();
  eval->add_option("--normals", ev.normals, "Normal policy: face or smooth")
      ->check(CLI::IsMember({"face", "smooth"}))
      ->capture_default_str();
  eval->add_flag("--normalize", ev.normalize, "Scale both meshes by the first mesh's unit-box transform");
  eval->add_option("--max-dpm", ev.max_dpm, "Exit with 1 if d_pm exceeds this");
  eval->add_option("--max-dnorm", ev.max_dnorm, "Exit with 1 if d_norm (degrees) exceeds this");

  std::string insp_in;
  CLI::App* insp = app.add_subcommand("inspect", "Print the contents of a container");
  insp->add_option("input", insp_in, "Container file")->required()->check(CLI::ExistingFile);

  AblateArgs ab;
  CLI::App* ablate = app.add_subcommand("ablate", "Exact-displacement quality over coarse sizes and levels");
  ablate->add_option("input", ab.input, "Input mesh")->required()->check(CLI::ExistingFile);
  ablate->add_option("--sizes", ab.sizes, "Coarse vertex counts")->delimiter(',')->capture_default_str();
  ablate->add_option("--levels", ab.levels, "Subdivision levels")->delimiter(',')->capture_default_str();
  ablate->add_option("--samples", ab.samples, "Samples per direction")->capture_default_str();
  ablate->add_option("--seed", ab.seed, "Sampling seed")->capture_default_str();
  ablate->add_option("--csv", ab.csv, "Also write the table to this CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  apply_threads(g);
  try {
    if (*encode) return run_encode(enc, g);
    if (*decode) return run_decode(dec_in, dec_out, g);
    if (*eval) return run_eval(ev, g);
    if (*insp) return run_inspect(insp_in, g);
    if (*ablate) return run_ablate(ab, g);
  } catch (const nmc::PipelineError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPipeline;
  }
  return kExitUsage;
}
