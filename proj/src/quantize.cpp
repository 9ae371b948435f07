#include "nmc/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "nmc/error.hpp"

namespace nmc {
namespace {

float round_down(double x) {
  float f = static_cast<float>(x);
  if (static_cast<double>(f) > x) f = std::nextafter(f, -std::numeric_limits<float>::infinity());
  return f;
}

float round_up(double x) {
  float f = static_cast<float>(x);
  if (static_cast<double>(f) < x) f = std::nextafter(f, std::numeric_limits<float>::infinity());
  return f;
}

}  // namespace

std::vector<std::uint8_t> QuantizedModel::payload() const {
  std::vector<std::uint8_t> out;
  for (const QuantizedTensor& t : tensors) out.insert(out.end(), t.codes.begin(), t.codes.end());
  return out;
}

std::uint8_t quantize_value(double x, float min, float max) {
  if (!(max > min)) return 0;
  const double lo = min, hi = max;
  const double q = std::round((x - lo) / (hi - lo) * 255.0);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

double dequantize_value(std::uint8_t code, float min, float max) {
  if (!(max > min)) return min;
  const double lo = min, hi = max;
  return lo + static_cast<double>(code) / 255.0 * (hi - lo);
}

QuantizedModel quantize_weights(const InrParams& params) {
  QuantizedModel model;
  model.arch = params.architecture();
  const auto& v = params.values();
  for (const TensorInfo& t : params.tensors()) {
    const auto first = v.begin() + static_cast<std::ptrdiff_t>(t.offset);
    const auto last = first + static_cast<std::ptrdiff_t>(t.size());
    if (!std::all_of(first, last, [](double x) { return std::isfinite(x); })) {
      throw NumericError("non-finite value in tensor " + t.name);
    }
    const auto [lo, hi] = std::minmax_element(first, last);
    QuantizedTensor q;
    if (*lo == *hi) {
      q.min = q.max = static_cast<float>(*lo);
    } else {
      q.min = round_down(*lo);
      q.max = round_up(*hi);
    }
    q.codes.reserve(t.size());
    for (auto it = first; it != last; ++it) q.codes.push_back(quantize_value(*it, q.min, q.max));
    model.tensors.push_back(std::move(q));
  }
  return model;
}

QuantizedModel assemble_quantized(const Architecture& arch, std::span<const std::pair<float, float>> ranges,
                                  std::span<const std::uint8_t> payload) {
  const std::vector<TensorInfo> layout = tensor_layout(arch);
  if (ranges.size() != layout.size()) {
    throw FormatError("expected " + std::to_string(layout.size()) + " tensor ranges, got " +
                      std::to_string(ranges.size()));
  }
  const std::size_t expected = layout.back().offset + layout.back().size();
  if (payload.size() != expected) {
    throw FormatError("payload holds " + std::to_string(payload.size()) + " codes, architecture needs " +
                      std::to_string(expected));
  }
  QuantizedModel model;
  model.arch = arch;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto [lo, hi] = ranges[i];
    if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
      throw FormatError("invalid range for tensor " + layout[i].name);
    }
    const auto codes = payload.subspan(layout[i].offset, layout[i].size());
    model.tensors.push_back({lo, hi, std::vector<std::uint8_t>(codes.begin(), codes.end())});
  }
  return model;
}

InrParams dequantize(const QuantizedModel& model) {
  InrParams params(model.arch);
  if (model.tensors.size() != params.tensors().size()) throw FormatError("tensor count does not match the architecture");
  auto& v = params.values();
  for (std::size_t t = 0; t < model.tensors.size(); ++t) {
    const TensorInfo& info = params.tensors()[t];
    const QuantizedTensor& q = model.tensors[t];
    if (q.codes.size() != info.size()) throw FormatError("tensor " + info.name + " has the wrong number of codes");
    for (std::size_t i = 0; i < q.codes.size(); ++i) v[info.offset + i] = dequantize_value(q.codes[i], q.min, q.max);
  }
  return params;
}

void quantize_activations(RowMatrix& m, int bits) {
  if (bits < 1 || bits > 24) throw std::invalid_argument("activation bit depth must be in [1, 24]");
  if (m.size() == 0) return;
  const double lo = m.minCoeff(), hi = m.maxCoeff();
  if (!(hi > lo)) return;
  const double levels = std::ldexp(1.0, bits) - 1.0;
  const double step = (hi - lo) / levels;
  m = ((m.array() - lo) / step).round() * step + lo;
}

RowMatrix quantized_forward(const QuantizedModel& model, const VertexBatch& batch, int activation_bits) {
  const InrParams params = dequantize(model);
  const ActivationHook hook = [activation_bits](RowMatrix& m) { quantize_activations(m, activation_bits); };
  return forward(params, batch, hook);
}

}  // namespace nmc
