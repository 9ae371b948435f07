#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace nmc {

inline constexpr int kMaxCodeLength = 15;
inline constexpr std::size_t kPackedTableBytes = 128;

/// Canonical Huffman stream over bytes. An all-zero length table with a
/// non-zero bit count means the payload is stored verbatim.
struct HuffmanStream {
  std::array<std::uint8_t, 256> lengths{};
  std::uint64_t bit_count = 0;
  std::vector<std::uint8_t> payload;

  bool stored_raw() const;
  /// Average bits per input symbol for coded streams, 8 when stored raw.
  double bits_per_symbol(std::size_t symbols) const;
  friend bool operator==(const HuffmanStream&, const HuffmanStream&) = default;
};

/// Throws std::invalid_argument on empty input. Falls back to raw storage when
/// coding would not beat the input size including the table.
HuffmanStream huffman_encode(std::span<const std::uint8_t> bytes);

/// Always codes, even when larger than the input (used by tests and stats).
HuffmanStream huffman_encode_coded(std::span<const std::uint8_t> bytes);

/// Throws FormatError on an invalid length table, a payload shorter than the
/// bit count, or a bit count that ends inside a code word.
std::vector<std::uint8_t> huffman_decode(const HuffmanStream& stream);

/// Code lengths for the given symbol frequencies, capped at kMaxCodeLength.
std::array<std::uint8_t, 256> huffman_code_lengths(const std::array<std::uint64_t, 256>& freq);

/// Throws FormatError unless the lengths describe a complete prefix code (or a
/// single symbol of length 1).
void validate_code_lengths(const std::array<std::uint8_t, 256>& lengths);

/// Two lengths per byte, low nibble first.
std::array<std::uint8_t, kPackedTableBytes> pack_lengths(const std::array<std::uint8_t, 256>& lengths);
std::array<std::uint8_t, 256> unpack_lengths(std::span<const std::uint8_t, kPackedTableBytes> packed);

}  // namespace nmc
