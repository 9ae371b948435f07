#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nmc/mesh.hpp"

namespace nmc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint8_t { Relu = 0 };

/// Shape of the displacement network. Everything the decoder needs to rebuild
/// the parameter tensors is in here.
struct Architecture {
  int frequencies = 10;  // Q; input width is 6Q
  int hidden_layers = 8;  // l, excluding the output head
  int width = 32;  // k
  int ring_layers = 4;  // g, hidden layers that accumulate one-ring features
  Activation activation = Activation::Relu;
  float layer_norm_eps = 1e-5f;

  int input_width() const { return 6 * frequencies; }
  /// Throws std::invalid_argument unless 1 <= Q, 1 <= l, 1 <= k <= 255, 0 <= g <= l, Q,l <= 255.
  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum class TensorKind : std::uint8_t { Weight, Bias, NormGain, NormOffset };

struct TensorInfo {
  std::string name;
  TensorKind kind = TensorKind::Weight;
  int rows = 0;
  int cols = 1;
  std::size_t offset = 0;  // into InrParams::values
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  friend bool operator==(const TensorInfo&, const TensorInfo&) = default;
};

/// Fixed serialization order: main weights W0..Wl, ring weights, main biases,
/// ring biases, then (gain, offset) per hidden layer. Row-major within tensors.
std::vector<TensorInfo> tensor_layout(const Architecture& arch);
std::size_t parameter_count(const Architecture& arch);

/// All network parameters in one flat buffer, addressed through the layout.
class InrParams {
 public:
  using MatrixView = Eigen::Map<RowMatrix>;
  using ConstMatrixView = Eigen::Map<const RowMatrix>;
  using VectorView = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

  InrParams() = default;
  explicit InrParams(const Architecture& arch);  // all zeros, gains included

  /// He-uniform weights scaled by fan-in, zero biases and offsets, unit gains.
  static InrParams initialize(const Architecture& arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  // Main layer m in [0, l]; ring layer m in [0, g); norm m in [0, l).
  MatrixView weight(int m) { return matrix(m); }
  ConstMatrixView weight(int m) const { return matrix(m); }
  VectorView bias(int m) { return vector(bias_index(m)); }
  ConstVectorView bias(int m) const { return vector(bias_index(m)); }
  MatrixView ring_weight(int m) { return matrix(ring_index(m)); }
  ConstMatrixView ring_weight(int m) const { return matrix(ring_index(m)); }
  VectorView ring_bias(int m) { return vector(ring_bias_index(m)); }
  ConstVectorView ring_bias(int m) const { return vector(ring_bias_index(m)); }
  VectorView gain(int m) { return vector(norm_index(m)); }
  ConstVectorView gain(int m) const { return vector(norm_index(m)); }
  VectorView offset(int m) { return vector(norm_index(m) + 1); }
  ConstVectorView offset(int m) const { return vector(norm_index(m) + 1); }

  bool all_finite() const;
  friend bool operator==(const InrParams&, const InrParams&) = default;

 private:
  int bias_index(int m) const { return arch_.hidden_layers + 1 + arch_.ring_layers + m; }
  int ring_index(int m) const { return arch_.hidden_layers + 1 + m; }
  int ring_bias_index(int m) const { return 2 * (arch_.hidden_layers + 1) + arch_.ring_layers + m; }
  int norm_index(int m) const { return 2 * (arch_.hidden_layers + 1 + arch_.ring_layers) + 2 * m; }

  MatrixView matrix(int t) {
    return {values_.data() + tensors_[t].offset, tensors_[t].rows, tensors_[t].cols};
  }
  ConstMatrixView matrix(int t) const {
    return {values_.data() + tensors_[t].offset, tensors_[t].rows, tensors_[t].cols};
  }
  VectorView vector(int t) { return {values_.data() + tensors_[t].offset, tensors_[t].rows}; }
  ConstVectorView vector(int t) const { return {values_.data() + tensors_[t].offset, tensors_[t].rows}; }

  Architecture arch_;
  std::vector<TensorInfo> tensors_;
  std::vector<double> values_;
};

/// (sin(pi c 2^0), cos(pi c 2^0), ..., sin(pi c 2^(Q-1)), cos(pi c 2^(Q-1))) for c = x, y, z.
Eigen::VectorXd positional_encode(const Vec3& p, int frequencies);

/// Network inputs for a set of vertices. Because the ring branch is linear,
/// the edge-weighted neighbor sum can be taken on the encoded inputs:
/// ring_inputs row i = sum_j e_ij * encode(p_j), ring_scale(i) = sum_j e_ij.
struct VertexBatch {
  RowMatrix inputs;       // B x 6Q
  RowMatrix ring_inputs;  // B x 6Q
  Eigen::VectorXd ring_scale;
  RowMatrix targets;  // B x 3, may be empty for inference

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
};

/// One-ring description of a vertex set; TrainingSet has the same shape.
struct VertexNeighborhoods {
  std::span<const Vec3> positions;
  std::span<const std::uint32_t> offsets;
  std::span<const std::uint32_t> neighbors;
  std::span<const double> edge_lengths;
};

/// Encodes every vertex once. Rows of the result can be gathered into batches.
VertexBatch encode_vertices(const VertexNeighborhoods& hood, int frequencies, std::span<const Vec3> targets = {});
VertexBatch gather(const VertexBatch& all, std::span<const std::uint32_t> rows);

struct Gradients {
  std::vector<double> values;  // aligned with InrParams::values
  double loss = 0.0;
};

/// Predicted displacements, B x 3. Throws NumericError naming the layer if an
/// activation becomes non-finite.
RowMatrix forward(const InrParams& params, const VertexBatch& batch);

/// Forward pass that lets `hook` rewrite every matrix fed into a layer
/// (inputs, ring features, hidden activations). Used to simulate low precision.
using ActivationHook = std::function<void(RowMatrix&)>;
RowMatrix forward(const InrParams& params, const VertexBatch& batch, const ActivationHook& hook);

/// Loss = mean over the batch of |pred - target|^2 and its exact gradient.
Gradients backward(const InrParams& params, const VertexBatch& batch);

double batch_loss(const InrParams& params, const VertexBatch& batch);

/// lr0 * 0.5 * (1 + cos(pi * step / total_steps))
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

struct AdamWHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamWState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Decoupled-weight-decay Adam. Entries with `frozen[i]` set are forced to
/// zero (value and moments) after the update; pass an empty span for none.
void adamw_step(std::vector<double>& params, std::span<const double> grads, AdamWState& state,
                const AdamWHyper& hyper, std::span<const std::uint8_t> frozen = {});

/// Evaluates the network over every vertex in fixed-size chunks, optionally in
/// parallel; results do not depend on the thread count.
std::vector<Vec3> predict(const InrParams& params, const VertexBatch& all, unsigned threads = 0);

}  // namespace nmc
