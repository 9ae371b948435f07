#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmc/container.hpp"
#include "nmc/metrics.hpp"
#include "nmc/simplify.hpp"
#include "nmc/subdivide.hpp"
#include "nmc/train.hpp"

namespace nmc {

struct CodecOptions {
  bool prune = true;
  bool quantize = true;
  bool entropy_code = true;
};

struct EncodeOptions {
  std::size_t coarse_vertices = 2000;
  int levels = 2;
  TrainConfig train;
  double prune_target = 0.5;
  int prune_steps = 5;
  std::vector<int> prune_epochs;  // empty: scaled_prune_epochs(train.epochs, prune_steps)
  CodecOptions codec;
  DecimateOptions decimate;
  bool measure_ssp_gt = true;
  bool measure_reconstruction = true;
  MetricOptions metrics{200'000, 0, 0, NormalPolicy::Face};
  EpochCallback on_epoch;
};

/// Everything computed before training: the normalized input, its coarse
/// version, the subdivided coarse mesh and the baked displacement targets.
struct PreparedMesh {
  NormalizationTransform transform;  // float32-exact, as stored in the container
  Mesh normalized;
  DecimationResult decimation;
  Mesh coarse;  // decimated mesh rounded to float32, as the decoder sees it
  SubdividedMesh subdivided;
  TrainingSet training;
  std::vector<std::string> warnings;
};

/// Throws PipelineError tagged with the failing stage.
PreparedMesh prepare_mesh(const Mesh& mesh, std::size_t coarse_vertices, int levels,
                          const DecimateOptions& decimate = {});

/// Serializes trained weights with the given codec stages.
CompressedContainer package_model(const PreparedMesh& prepared, const InrParams& params, const CodecOptions& codec);

/// Reconstruction in normalized coordinates (before the inverse transform).
Mesh decode_normalized(const CompressedContainer& c, unsigned threads = 0);
/// Full decode back to the input's coordinate frame.
Mesh decode(const CompressedContainer& c, unsigned threads = 0);

struct EncodeReport {
  std::size_t input_vertices = 0;
  std::size_t input_faces = 0;
  std::size_t coarse_vertices = 0;
  std::size_t coarse_faces = 0;
  std::size_t subdivided_vertices = 0;
  std::size_t subdivided_faces = 0;
  std::size_t parameters = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double keep_fraction = 1.0;
  ContainerSizes sizes;
  double raw_bits = 0.0;
  double ratio = 0.0;  // container bytes / raw bytes
  bool has_ssp_gt = false;
  QualityReport ssp_gt;
  bool has_reconstruction = false;
  QualityReport reconstruction;  // decoded container vs normalized input
  double prepare_seconds = 0.0;
  double train_seconds = 0.0;
  double total_seconds = 0.0;
  std::vector<std::string> warnings;
};

struct EncodeResult {
  CompressedContainer container;
  EncodeReport report;
  TrainResult training;
  PreparedMesh prepared;
};

EncodeResult encode(const Mesh& mesh, const EncodeOptions& options);

}  // namespace nmc
