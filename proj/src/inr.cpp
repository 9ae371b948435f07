#include "nmc/inr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nmc/error.hpp"
#include "nmc/rng.hpp"
#include "parallel.hpp"

namespace nmc {

void Architecture::validate() const {
  if (frequencies < 1 || frequencies > 255) throw std::invalid_argument("frequency count must be in [1, 255]");
  if (hidden_layers < 1 || hidden_layers > 255) throw std::invalid_argument("hidden layer count must be in [1, 255]");
  if (width < 1 || width > 255) throw std::invalid_argument("layer width must be in [1, 255]");
  if (ring_layers < 0 || ring_layers > hidden_layers) {
    throw std::invalid_argument("ring layer count must be in [0, hidden layers]");
  }
  if (activation != Activation::Relu) throw std::invalid_argument("unknown activation");
  if (!(layer_norm_eps > 0.0f) || !std::isfinite(layer_norm_eps)) {
    throw std::invalid_argument("layer norm epsilon must be positive");
  }
}

std::vector<TensorInfo> tensor_layout(const Architecture& arch) {
  arch.validate();
  const int l = arch.hidden_layers, k = arch.width, g = arch.ring_layers, in = arch.input_width();
  std::vector<TensorInfo> t;
  auto add = [&](std::string name, TensorKind kind, int rows, int cols) {
    const std::size_t offset = t.empty() ? 0 : t.back().offset + t.back().size();
    t.push_back({std::move(name), kind, rows, cols, offset});
  };
  for (int m = 0; m <= l; ++m) {
    add("main." + std::to_string(m) + ".weight", TensorKind::Weight, m == l ? 3 : k, m == 0 ? in : k);
  }
  for (int m = 0; m < g; ++m) add("ring." + std::to_string(m) + ".weight", TensorKind::Weight, k, m == 0 ? in : k);
  for (int m = 0; m <= l; ++m) add("main." + std::to_string(m) + ".bias", TensorKind::Bias, m == l ? 3 : k, 1);
  for (int m = 0; m < g; ++m) add("ring." + std::to_string(m) + ".bias", TensorKind::Bias, k, 1);
  for (int m = 0; m < l; ++m) {
    add("norm." + std::to_string(m) + ".gain", TensorKind::NormGain, k, 1);
    add("norm." + std::to_string(m) + ".offset", TensorKind::NormOffset, k, 1);
  }
  return t;
}

std::size_t parameter_count(const Architecture& arch) {
  const auto t = tensor_layout(arch);
  return t.back().offset + t.back().size();
}

InrParams::InrParams(const Architecture& arch)
    : arch_(arch), tensors_(tensor_layout(arch)), values_(parameter_count(arch), 0.0) {}

InrParams InrParams::initialize(const Architecture& arch, std::uint64_t seed) {
  InrParams p(arch);
  Rng rng(seed);
  for (const TensorInfo& t : p.tensors_) {
    double* v = p.values_.data() + t.offset;
    switch (t.kind) {
      case TensorKind::Weight: {
        const double bound = std::sqrt(6.0 / t.cols);
        for (std::size_t i = 0; i < t.size(); ++i) v[i] = rng.uniform(-bound, bound);
        break;
      }
      case TensorKind::NormGain:
        std::fill(v, v + t.size(), 1.0);
        break;
      default:
        break;
    }
  }
  return p;
}

bool InrParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

Eigen::VectorXd positional_encode(const Vec3& p, int frequencies) {
  Eigen::VectorXd out(6 * frequencies);
  for (int c = 0; c < 3; ++c) {
    for (int q = 0; q < frequencies; ++q) {
      const double arg = std::numbers::pi * p[c] * std::ldexp(1.0, q);
      out[c * 2 * frequencies + 2 * q] = std::sin(arg);
      out[c * 2 * frequencies + 2 * q + 1] = std::cos(arg);
    }
  }
  return out;
}

VertexBatch encode_vertices(const VertexNeighborhoods& hood, int frequencies, std::span<const Vec3> targets) {
  const std::size_t n = hood.positions.size();
  if (hood.offsets.size() != n + 1) throw std::invalid_argument("neighbor offsets do not match vertex count");
  const int width = 6 * frequencies;
  VertexBatch b;
  b.inputs.resize(static_cast<Eigen::Index>(n), width);
  for (std::size_t i = 0; i < n; ++i) b.inputs.row(static_cast<Eigen::Index>(i)) = positional_encode(hood.positions[i], frequencies);
  b.ring_inputs = RowMatrix::Zero(static_cast<Eigen::Index>(n), width);
  b.ring_scale = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::uint32_t e = hood.offsets[i]; e < hood.offsets[i + 1]; ++e) {
      const double w = hood.edge_lengths[e];
      b.ring_inputs.row(r) += w * b.inputs.row(hood.neighbors[e]);
      b.ring_scale[r] += w;
    }
  }
  if (!targets.empty()) {
    if (targets.size() != n) throw std::invalid_argument("target count does not match vertex count");
    b.targets.resize(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) b.targets.row(static_cast<Eigen::Index>(i)) = targets[i].transpose();
  }
  return b;
}

VertexBatch gather(const VertexBatch& all, std::span<const std::uint32_t> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  VertexBatch b;
  b.inputs.resize(n, all.inputs.cols());
  b.ring_inputs.resize(n, all.ring_inputs.cols());
  b.ring_scale.resize(n);
  if (all.targets.size() > 0) b.targets.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    b.inputs.row(i) = all.inputs.row(r);
    b.ring_inputs.row(i) = all.ring_inputs.row(r);
    b.ring_scale[i] = all.ring_scale[r];
    if (all.targets.size() > 0) b.targets.row(i) = all.targets.row(r);
  }
  return b;
}

namespace {

struct LayerCache {
  RowMatrix normalized;  // xhat
  Eigen::VectorXd inv_std;
  RowMatrix output;  // after activation
};

struct ForwardCache {
  std::vector<RowMatrix> ring;  // ring[m] = accumulated ring features entering layer m's sum, m in [0, g]
  std::vector<LayerCache> layers;
  RowMatrix prediction;
};

void check_finite(const RowMatrix& m, int layer) {
  if (!m.allFinite()) throw NumericError("non-finite activation at layer " + std::to_string(layer));
}

void check_batch(const InrParams& params, const VertexBatch& batch) {
  const Architecture& a = params.architecture();
  if (batch.inputs.cols() != a.input_width() || batch.ring_inputs.cols() != a.input_width() ||
      batch.ring_inputs.rows() != batch.inputs.rows() || batch.ring_scale.size() != batch.inputs.rows()) {
    throw std::invalid_argument("batch shape does not match the network input width");
  }
}

ForwardCache run_forward(const InrParams& params, const VertexBatch& batch, bool keep,
                         const ActivationHook* hook = nullptr) {
  check_batch(params, batch);
  const Architecture& a = params.architecture();
  const int l = a.hidden_layers, g = a.ring_layers;
  const double eps = a.layer_norm_eps;
  ForwardCache c;
  c.ring.reserve(g + 1);
  c.ring.push_back(batch.ring_inputs);
  if (hook) (*hook)(c.ring.back());
  for (int m = 0; m < g; ++m) {
    RowMatrix next = c.ring.back() * params.ring_weight(m).transpose();
    next += batch.ring_scale * params.ring_bias(m).transpose();
    if (hook) (*hook)(next);
    c.ring.push_back(std::move(next));
  }

  RowMatrix h = batch.inputs;
  if (hook) (*hook)(h);
  c.layers.resize(l);
  for (int m = 0; m < l; ++m) {
    RowMatrix z = h * params.weight(m).transpose();
    z.rowwise() += params.bias(m).transpose();
    if (m < g) z = 0.5 * (z + c.ring[m + 1]);
    const Eigen::VectorXd mean = z.rowwise().mean();
    z.colwise() -= mean;
    const Eigen::VectorXd inv_std = ((z.array().square().rowwise().sum() / z.cols()) + eps).rsqrt().matrix();
    RowMatrix xhat = inv_std.asDiagonal() * z;
    RowMatrix y = xhat * params.gain(m).asDiagonal();
    y.rowwise() += params.offset(m).transpose();
    h = y.cwiseMax(0.0);
    check_finite(h, m);
    if (hook) (*hook)(h);
    if (keep) {
      c.layers[m].normalized = std::move(xhat);
      c.layers[m].inv_std = inv_std;
      c.layers[m].output = h;
    }
  }
  c.prediction = h * params.weight(l).transpose();
  c.prediction.rowwise() += params.bias(l).transpose();
  check_finite(c.prediction, l);
  if (keep) c.layers.push_back({RowMatrix(), Eigen::VectorXd(), batch.inputs});
  return c;
}

}  // namespace

RowMatrix forward(const InrParams& params, const VertexBatch& batch) {
  return run_forward(params, batch, false).prediction;
}

RowMatrix forward(const InrParams& params, const VertexBatch& batch, const ActivationHook& hook) {
  return run_forward(params, batch, false, &hook).prediction;
}

double batch_loss(const InrParams& params, const VertexBatch& batch) {
  const RowMatrix pred = forward(params, batch);
  if (batch.size() == 0) return 0.0;
  return (pred - batch.targets).squaredNorm() / static_cast<double>(batch.size());
}

Gradients backward(const InrParams& params, const VertexBatch& batch) {
  const Architecture& a = params.architecture();
  const int l = a.hidden_layers, g = a.ring_layers;
  Gradients grads;
  grads.values.assign(params.size(), 0.0);
  const auto n = static_cast<double>(batch.size());
  if (batch.size() == 0) return grads;
  if (batch.targets.rows() != batch.inputs.rows() || batch.targets.cols() != 3) {
    throw std::invalid_argument("batch has no targets");
  }

  ForwardCache c = run_forward(params, batch, true);
  const RowMatrix& input = c.layers.back().output;  // the extra entry holds the network input
  auto layer_input = [&](int m) -> const RowMatrix& { return m == 0 ? input : c.layers[m - 1].output; };

  InrParams gp(a);  // views into a zeroed buffer with the same layout
  RowMatrix diff = c.prediction - batch.targets;
  grads.loss = diff.squaredNorm() / n;
  RowMatrix dh = (2.0 / n) * diff;

  gp.weight(l) = dh.transpose() * c.layers[l - 1].output;
  gp.bias(l) = dh.colwise().sum().transpose();
  dh = dh * params.weight(l);

  std::vector<RowMatrix> dring(g + 1);
  for (int m = l - 1; m >= 0; --m) {
    const LayerCache& lc = c.layers[m];
    RowMatrix dy = (lc.output.array() > 0.0).select(dh, 0.0);
    gp.gain(m) = (dy.cwiseProduct(lc.normalized)).colwise().sum().transpose();
    gp.offset(m) = dy.colwise().sum().transpose();
    RowMatrix dx = dy * params.gain(m).asDiagonal();
    const Eigen::VectorXd mean_dx = dx.rowwise().mean();
    const Eigen::VectorXd mean_dx_x = dx.cwiseProduct(lc.normalized).rowwise().mean();
    RowMatrix dz = dx;
    dz.colwise() -= mean_dx;
    dz -= mean_dx_x.asDiagonal() * lc.normalized;
    dz = lc.inv_std.asDiagonal() * dz;
    if (m < g) {
      dz *= 0.5;
      dring[m + 1] = dz;
    }
    gp.weight(m) = dz.transpose() * layer_input(m);
    gp.bias(m) = dz.colwise().sum().transpose();
    if (m > 0) dh = dz * params.weight(m);
  }

  // Ring chain: ring[m + 1] = ring[m] * R_m^T + scale * rb_m^T feeds layer m and ring[m + 2].
  RowMatrix carry;
  for (int m = g - 1; m >= 0; --m) {
    RowMatrix dr = dring[m + 1];
    if (m + 1 < g) dr += carry;
    gp.ring_weight(m) = dr.transpose() * c.ring[m];
    gp.ring_bias(m) = dr.transpose() * batch.ring_scale;
    if (m > 0) carry = dr * params.ring_weight(m);
  }
  grads.values = std::move(gp.values());
  return grads;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  if (total_steps == 0) return lr0;
  const double t = static_cast<double>(std::min(step, total_steps)) / static_cast<double>(total_steps);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void adamw_step(std::vector<double>& params, std::span<const double> grads, AdamWState& state,
                const AdamWHyper& hyper, std::span<const std::uint8_t> frozen) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n || (!frozen.empty() && frozen.size() != n)) {
    throw std::invalid_argument("optimizer state does not match parameter count");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - hyper.lr * hyper.weight_decay;
  for (std::size_t i = 0; i < n; ++i) {
    if (!frozen.empty() && frozen[i]) {
      params[i] = 0.0;
      state.m[i] = state.v[i] = 0.0;
      continue;
    }
    const double gi = grads[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * gi;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * gi * gi;
    const double mhat = state.m[i] / c1, vhat = state.v[i] / c2;
    params[i] = params[i] * decay - hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
}

std::vector<Vec3> predict(const InrParams& params, const VertexBatch& all, unsigned threads) {
  constexpr std::size_t kChunk = 4096;
  const std::size_t n = all.size();
  std::vector<Vec3> out(n);
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  // Rows do not interact, so chunk boundaries do not change the result.
  detail::parallel_for(
      chunks, threads,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
          const std::size_t lo = c * kChunk, hi = std::min(n, lo + kChunk);
          std::vector<std::uint32_t> rows(hi - lo);
          for (std::size_t i = lo; i < hi; ++i) rows[i - lo] = static_cast<std::uint32_t>(i);
          const RowMatrix pred = forward(params, gather(all, rows));
          for (std::size_t i = lo; i < hi; ++i) out[i] = pred.row(static_cast<Eigen::Index>(i - lo)).transpose();
        }
      },
      1);
  return out;
}

}  // namespace nmc
