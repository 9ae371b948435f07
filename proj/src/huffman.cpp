#include "nmc/huffman.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>

#include "nmc/error.hpp"

namespace nmc {
namespace {

struct Canonical {
  std::array<std::uint16_t, 256> code{};
  std::array<std::uint32_t, kMaxCodeLength + 2> count{};  // codes per length
  std::array<std::uint32_t, kMaxCodeLength + 2> first{};  // first code per length
  std::array<std::uint32_t, kMaxCodeLength + 2> index{};  // first position in `sorted`
  std::vector<std::uint8_t> sorted;  // symbols by (length, symbol)
};

Canonical canonical(const std::array<std::uint8_t, 256>& lengths) {
  Canonical c;
  for (int s = 0; s < 256; ++s) {
    if (lengths[s]) ++c.count[lengths[s]];
  }
  for (int len = 1; len <= kMaxCodeLength; ++len) {
    for (int s = 0; s < 256; ++s) {
      if (lengths[s] == len) c.sorted.push_back(static_cast<std::uint8_t>(s));
    }
  }
  std::uint32_t code = 0, pos = 0;
  for (int len = 1; len <= kMaxCodeLength; ++len) {
    c.first[len] = code;
    c.index[len] = pos;
    code = (code + c.count[len]) << 1;
    pos += c.count[len];
  }
  for (int len = 1; len <= kMaxCodeLength; ++len) {
    std::uint32_t next = c.first[len];
    for (std::uint32_t i = c.index[len]; i < c.index[len] + c.count[len]; ++i) c.code[c.sorted[i]] = static_cast<std::uint16_t>(next++);
  }
  return c;
}

std::array<std::uint8_t, 256> build_lengths(const std::array<std::uint64_t, 256>& freq) {
  std::array<std::uint8_t, 256> lengths{};
  // Nodes ordered by (weight, id); leaves use their symbol as id.
  using Node = std::tuple<std::uint64_t, int>;
  std::priority_queue<Node, std::vector<Node>, std::greater<>> heap;
  std::vector<int> parent(512, -1);
  int present = 0;
  for (int s = 0; s < 256; ++s) {
    if (freq[s]) {
      heap.emplace(freq[s], s);
      ++present;
    }
  }
  if (present == 0) return lengths;
  if (present == 1) {
    lengths[std::get<1>(heap.top())] = 1;
    return lengths;
  }
  int next_id = 256;
  while (heap.size() > 1) {
    const auto [wa, a] = heap.top();
    heap.pop();
    const auto [wb, b] = heap.top();
    heap.pop();
    parent[a] = parent[b] = next_id;
    heap.emplace(wa + wb, next_id++);
  }
  for (int s = 0; s < 256; ++s) {
    if (!freq[s]) continue;
    int depth = 0;
    for (int n = s; parent[n] >= 0; n = parent[n]) ++depth;
    lengths[s] = static_cast<std::uint8_t>(std::min(depth, 255));
  }
  return lengths;
}

class BitWriter {
 public:
  void put(std::uint32_t code, int len) {
    for (int i = len - 1; i >= 0; --i) {
      if (bits_ % 8 == 0) out_.push_back(0);
      if ((code >> i) & 1u) out_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
      ++bits_;
    }
  }
  std::uint64_t bits() const { return bits_; }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
  std::uint64_t bits_ = 0;
};

HuffmanStream raw_stream(std::span<const std::uint8_t> bytes) {
  HuffmanStream s;
  s.bit_count = static_cast<std::uint64_t>(bytes.size()) * 8;
  s.payload.assign(bytes.begin(), bytes.end());
  return s;
}

}  // namespace

bool HuffmanStream::stored_raw() const {
  return bit_count > 0 && std::all_of(lengths.begin(), lengths.end(), [](std::uint8_t l) { return l == 0; });
}

double HuffmanStream::bits_per_symbol(std::size_t symbols) const {
  if (stored_raw() || symbols == 0) return 8.0;
  return static_cast<double>(bit_count) / static_cast<double>(symbols);
}

std::array<std::uint8_t, 256> huffman_code_lengths(const std::array<std::uint64_t, 256>& freq) {
  std::array<std::uint64_t, 256> f = freq;
  for (;;) {
    const auto lengths = build_lengths(f);
    if (*std::max_element(lengths.begin(), lengths.end()) <= kMaxCodeLength) return lengths;
    for (auto& x : f) {
      if (x) x = std::max<std::uint64_t>(1, x / 2);
    }
  }
}

void validate_code_lengths(const std::array<std::uint8_t, 256>& lengths) {
  std::uint64_t kraft = 0;  // in units of 2^-kMaxCodeLength
  int present = 0;
  for (std::uint8_t len : lengths) {
    if (len == 0) continue;
    if (len > kMaxCodeLength) throw FormatError("code length " + std::to_string(len) + " exceeds the maximum");
    kraft += std::uint64_t{1} << (kMaxCodeLength - len);
    ++present;
  }
  const std::uint64_t full = std::uint64_t{1} << kMaxCodeLength;
  if (present == 0) throw FormatError("empty code length table");
  if (present == 1) {
    if (kraft != full / 2) throw FormatError("a single symbol must have code length 1");
    return;
  }
  if (kraft != full) throw FormatError("code lengths violate the Kraft equality");
}

HuffmanStream huffman_encode_coded(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw std::invalid_argument("cannot entropy-code an empty byte sequence");
  std::array<std::uint64_t, 256> freq{};
  for (std::uint8_t b : bytes) ++freq[b];
  HuffmanStream s;
  s.lengths = huffman_code_lengths(freq);
  const Canonical c = canonical(s.lengths);
  BitWriter w;
  for (std::uint8_t b : bytes) w.put(c.code[b], s.lengths[b]);
  s.bit_count = w.bits();
  s.payload = w.take();
  return s;
}

HuffmanStream huffman_encode(std::span<const std::uint8_t> bytes) {
  HuffmanStream coded = huffman_encode_coded(bytes);
  if (coded.payload.size() + kPackedTableBytes >= bytes.size()) return raw_stream(bytes);
  return coded;
}

std::vector<std::uint8_t> huffman_decode(const HuffmanStream& stream) {
  if (stream.bit_count == 0) throw FormatError("empty entropy-coded stream");
  const std::uint64_t needed = (stream.bit_count + 7) / 8;
  if (stream.payload.size() < needed) {
    throw FormatError("truncated payload: " + std::to_string(stream.payload.size()) + " bytes for " +
                      std::to_string(stream.bit_count) + " bits");
  }
  if (stream.stored_raw()) {
    if (stream.bit_count % 8 != 0) throw FormatError("raw payload bit count is not a whole number of bytes");
    return {stream.payload.begin(), stream.payload.begin() + static_cast<std::ptrdiff_t>(needed)};
  }
  validate_code_lengths(stream.lengths);
  const Canonical c = canonical(stream.lengths);
  std::vector<std::uint8_t> out;
  std::uint64_t pos = 0;
  while (pos < stream.bit_count) {
    std::uint32_t code = 0;
    int len = 0;
    for (;;) {
      if (pos >= stream.bit_count) throw FormatError("bit count ends inside a code word");
      const std::uint8_t byte = stream.payload[pos / 8];
      code = (code << 1) | ((byte >> (7 - pos % 8)) & 1u);
      ++pos;
      ++len;
      if (len > kMaxCodeLength) throw FormatError("invalid code word");
      if (c.count[len] && code >= c.first[len] && code - c.first[len] < c.count[len]) {
        out.push_back(c.sorted[c.index[len] + code - c.first[len]]);
        break;
      }
    }
  }
  return out;
}

std::array<std::uint8_t, kPackedTableBytes> pack_lengths(const std::array<std::uint8_t, 256>& lengths) {
  std::array<std::uint8_t, kPackedTableBytes> out{};
  for (std::size_t i = 0; i < kPackedTableBytes; ++i) {
    if (lengths[2 * i] > 15 || lengths[2 * i + 1] > 15) throw std::invalid_argument("code length does not fit a nibble");
    out[i] = static_cast<std::uint8_t>(lengths[2 * i] | (lengths[2 * i + 1] << 4));
  }
  return out;
}

std::array<std::uint8_t, 256> unpack_lengths(std::span<const std::uint8_t, kPackedTableBytes> packed) {
  std::array<std::uint8_t, 256> out{};
  for (std::size_t i = 0; i < kPackedTableBytes; ++i) {
    out[2 * i] = packed[i] & 0x0f;
    out[2 * i + 1] = packed[i] >> 4;
  }
  return out;
}

}  // namespace nmc
