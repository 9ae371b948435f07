#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nmc/inr.hpp"

namespace nmc {

struct QuantizedTensor {
  float min = 0.0f;
  float max = 0.0f;
  std::vector<std::uint8_t> codes;

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

struct QuantizedModel {
  Architecture arch;
  std::vector<QuantizedTensor> tensors;  // tensor_layout order

  /// Codes of every tensor concatenated in layout order.
  std::vector<std::uint8_t> payload() const;
  friend bool operator==(const QuantizedModel&, const QuantizedModel&) = default;
};

/// code = clamp(round((x - min) / (max - min) * 255), 0, 255)
std::uint8_t quantize_value(double x, float min, float max);
/// min + code / 255 * (max - min); exactly `min` for a constant tensor.
double dequantize_value(std::uint8_t code, float min, float max);

/// Per-tensor 8-bit affine quantization. The stored range is the tensor's
/// min/max rounded outward to float32. Throws NumericError on non-finite input.
QuantizedModel quantize_weights(const InrParams& params);

/// Rebuilds tensors from ranges and a code payload in layout order.
/// Throws FormatError if the payload length or range count does not match.
QuantizedModel assemble_quantized(const Architecture& arch, std::span<const std::pair<float, float>> ranges,
                                  std::span<const std::uint8_t> payload);

InrParams dequantize(const QuantizedModel& model);

/// Simulated low-precision inference: dequantized weights, and every layer's
/// activations rounded to `activation_bits` over that batch's own range.
RowMatrix quantized_forward(const QuantizedModel& model, const VertexBatch& batch, int activation_bits = 8);

/// Rounds every entry to `bits` over the matrix's min/max; constant input is left untouched.
void quantize_activations(RowMatrix& m, int bits);

}  // namespace nmc
