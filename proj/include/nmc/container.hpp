#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nmc/huffman.hpp"
#include "nmc/inr.hpp"
#include "nmc/mesh.hpp"

namespace nmc {

inline constexpr std::array<char, 4> kContainerMagic{'N', 'M', 'C', '1'};
inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::uint8_t kCoarseCodecRaw = 0;
inline constexpr int kMaxSubdivisionLevel = 8;

enum ContainerFlag : std::uint8_t {
  kFlagQuantized = 1u << 0,
  kFlagEntropyCoded = 1u << 1,
  kFlagPruned = 1u << 2,
};

/// Everything needed to rebuild a mesh; see serialize_container for the byte layout.
struct CompressedContainer {
  std::uint8_t version = kContainerVersion;
  Architecture arch;
  int levels = 0;
  std::uint8_t flags = 0;
  std::array<float, 4> transform{0.0f, 0.0f, 0.0f, 1.0f};  // translation xyz, scale
  std::uint8_t coarse_codec = kCoarseCodecRaw;
  std::vector<float> coarse_positions;  // 3 per vertex
  std::vector<std::uint32_t> coarse_indices;  // 3 per face
  std::vector<std::pair<float, float>> ranges;  // per tensor, only when quantized
  HuffmanStream stream;

  bool quantized() const { return flags & kFlagQuantized; }
  bool entropy_coded() const { return flags & kFlagEntropyCoded; }
  bool pruned() const { return flags & kFlagPruned; }
  std::size_t coarse_vertex_count() const { return coarse_positions.size() / 3; }
  std::size_t coarse_face_count() const { return coarse_indices.size() / 3; }

  Mesh coarse_mesh() const;
  NormalizationTransform normalization() const;
  friend bool operator==(const CompressedContainer&, const CompressedContainer&) = default;
};

/// Little-endian layout:
///   "NMC1" | version u8 | Q l k g s u8 | activation u8 | flags u8 | ln-eps f32 | transform 4 x f32
///   coarse codec u8 | v u32 | f u32 | 3v x f32 | 3f x u32
///   quantized only: (min f32, max f32) per tensor in layout order
///   128-byte packed code lengths | payload bit count u64 | payload bytes
std::vector<std::uint8_t> serialize_container(const CompressedContainer& c);
/// Throws FormatError on any malformed or truncated input.
CompressedContainer parse_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, const CompressedContainer& c);
CompressedContainer read_container(const std::filesystem::path& path);

struct ContainerSizes {
  std::size_t header = 0;  // magic through transform
  std::size_t coarse = 0;
  std::size_t quant_metadata = 0;
  std::size_t table = 0;  // packed lengths + bit count
  std::size_t payload = 0;
  std::size_t total = 0;
};

ContainerSizes container_sizes(const CompressedContainer& c);

/// Payload bytes after entropy decoding, length-checked against the architecture.
std::vector<std::uint8_t> decode_payload(const CompressedContainer& c);

/// Network parameters as the decoder sees them (dequantized or float32).
InrParams container_params(const CompressedContainer& c);

struct InspectReport {
  ContainerSizes sizes;
  std::size_t parameters = 0;
  std::size_t weights = 0;
  std::size_t zero_weights = 0;  // exact zeros, or codes nearest zero when quantized
  double weight_sparsity = 0.0;  // zero_weights / weights
  double bits_per_symbol = 0.0;
  std::size_t coarse_vertices = 0;
  std::size_t coarse_faces = 0;
  std::size_t decoded_faces = 0;  // 4^s * coarse faces
};

/// Throws FormatError if the payload cannot be decoded.
InspectReport inspect(const CompressedContainer& c);

}  // namespace nmc
