#include "nmc/container.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "nmc/error.hpp"
#include "nmc/quantize.hpp"

namespace nmc {
namespace {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw FormatError(std::string("truncated container while reading ") + what);
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return take(1, what)[0]; }
  std::uint32_t u32(const char* what) {
    const auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{s[i]} << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    const auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{s[i]} << (8 * i);
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kHeaderBytes = 4 + 1 + 5 + 1 + 1 + 4 + 16;

std::size_t tensor_count(const Architecture& a) { return 2 * (a.hidden_layers + 1 + a.ring_layers) + 2 * a.hidden_layers; }

}  // namespace

Mesh CompressedContainer::coarse_mesh() const {
  std::vector<Vec3> v(coarse_vertex_count());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = Vec3(coarse_positions[3 * i], coarse_positions[3 * i + 1], coarse_positions[3 * i + 2]);
  }
  std::vector<Face> f(coarse_face_count());
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = {coarse_indices[3 * i], coarse_indices[3 * i + 1], coarse_indices[3 * i + 2]};
  }
  return Mesh(std::move(v), std::move(f));
}

NormalizationTransform CompressedContainer::normalization() const {
  NormalizationTransform t;
  t.translation = Vec3(transform[0], transform[1], transform[2]);
  t.scale = transform[3];
  return t;
}

std::vector<std::uint8_t> serialize_container(const CompressedContainer& c) {
  c.arch.validate();
  if (c.levels < 0 || c.levels > kMaxSubdivisionLevel) throw std::invalid_argument("subdivision level out of range");
  if (c.coarse_positions.size() % 3 || c.coarse_indices.size() % 3) {
    throw std::invalid_argument("coarse mesh arrays must hold whole vertices and faces");
  }
  if (c.quantized() != !c.ranges.empty() || (c.quantized() && c.ranges.size() != tensor_count(c.arch))) {
    throw std::invalid_argument("quantization ranges do not match the flags and architecture");
  }
  if (c.stream.payload.size() != (c.stream.bit_count + 7) / 8) {
    throw std::invalid_argument("payload size does not match its bit count");
  }
  ByteWriter w;
  for (char ch : kContainerMagic) w.u8(static_cast<std::uint8_t>(ch));
  w.u8(c.version);
  w.u8(static_cast<std::uint8_t>(c.arch.frequencies));
  w.u8(static_cast<std::uint8_t>(c.arch.hidden_layers));
  w.u8(static_cast<std::uint8_t>(c.arch.width));
  w.u8(static_cast<std::uint8_t>(c.arch.ring_layers));
  w.u8(static_cast<std::uint8_t>(c.levels));
  w.u8(static_cast<std::uint8_t>(c.arch.activation));
  w.u8(c.flags);
  w.f32(c.arch.layer_norm_eps);
  for (float t : c.transform) w.f32(t);

  w.u8(c.coarse_codec);
  w.u32(static_cast<std::uint32_t>(c.coarse_vertex_count()));
  w.u32(static_cast<std::uint32_t>(c.coarse_face_count()));
  for (float p : c.coarse_positions) w.f32(p);
  for (std::uint32_t i : c.coarse_indices) w.u32(i);

  for (const auto& [lo, hi] : c.ranges) {
    w.f32(lo);
    w.f32(hi);
  }
  const auto table = pack_lengths(c.stream.lengths);
  w.bytes(table);
  w.u64(c.stream.bit_count);
  w.bytes(c.stream.payload);
  return w.take();
}

CompressedContainer parse_container(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kContainerMagic.begin(),
                  [](std::uint8_t b, char ch) { return b == static_cast<std::uint8_t>(ch); })) {
    throw FormatError("not a compressed mesh container (bad magic)");
  }
  CompressedContainer c;
  c.version = r.u8("version");
  if (c.version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(c.version));
  }
  c.arch.frequencies = r.u8("header");
  c.arch.hidden_layers = r.u8("header");
  c.arch.width = r.u8("header");
  c.arch.ring_layers = r.u8("header");
  c.levels = r.u8("header");
  c.arch.activation = static_cast<Activation>(r.u8("header"));
  c.flags = r.u8("header");
  c.arch.layer_norm_eps = r.f32("header");
  for (float& t : c.transform) t = r.f32("transform");
  try {
    c.arch.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid network header: ") + e.what());
  }
  if (c.levels > kMaxSubdivisionLevel) throw FormatError("subdivision level " + std::to_string(c.levels) + " is too large");
  if (c.flags & ~(kFlagQuantized | kFlagEntropyCoded | kFlagPruned)) throw FormatError("unknown header flags");
  for (float t : c.transform) {
    if (!std::isfinite(t)) throw FormatError("non-finite normalization transform");
  }
  if (!(c.transform[3] > 0.0f)) throw FormatError("normalization scale must be positive");

  c.coarse_codec = r.u8("coarse codec");
  if (c.coarse_codec != kCoarseCodecRaw) {
    throw FormatError("unsupported coarse mesh codec " + std::to_string(c.coarse_codec));
  }
  const std::uint32_t v = r.u32("coarse vertex count");
  const std::uint32_t f = r.u32("coarse face count");
  if (std::uint64_t{v} * 12 + std::uint64_t{f} * 12 > r.remaining()) throw FormatError("truncated coarse mesh block");
  c.coarse_positions.resize(std::size_t{v} * 3);
  for (float& p : c.coarse_positions) {
    p = r.f32("coarse positions");
    if (!std::isfinite(p)) throw FormatError("non-finite coarse vertex position");
  }
  c.coarse_indices.resize(std::size_t{f} * 3);
  for (std::uint32_t& i : c.coarse_indices) {
    i = r.u32("coarse indices");
    if (i >= v) throw FormatError("coarse face index out of range");
  }

  if (c.quantized()) {
    c.ranges.resize(tensor_count(c.arch));
    for (auto& [lo, hi] : c.ranges) {
      lo = r.f32("quantization ranges");
      hi = r.f32("quantization ranges");
      if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) throw FormatError("invalid quantization range");
    }
  }
  const auto table = r.take(kPackedTableBytes, "code length table");
  c.stream.lengths = unpack_lengths(std::span<const std::uint8_t, kPackedTableBytes>(table.data(), kPackedTableBytes));
  c.stream.bit_count = r.u64("payload bit count");
  const std::uint64_t payload_bytes = (c.stream.bit_count + 7) / 8;
  if (payload_bytes > r.remaining()) throw FormatError("truncated payload");
  const auto payload = r.take(static_cast<std::size_t>(payload_bytes), "payload");
  c.stream.payload.assign(payload.begin(), payload.end());
  if (r.remaining() != 0) throw FormatError(std::to_string(r.remaining()) + " unexpected trailing bytes");
  return c;
}

void write_container(const std::filesystem::path& path, const CompressedContainer& c) {
  const std::vector<std::uint8_t> bytes = serialize_container(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

CompressedContainer read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_container(bytes);
}

ContainerSizes container_sizes(const CompressedContainer& c) {
  ContainerSizes s;
  s.header = kHeaderBytes;
  s.coarse = 1 + 4 + 4 + 4 * c.coarse_positions.size() + 4 * c.coarse_indices.size();
  s.quant_metadata = 8 * c.ranges.size();
  s.table = kPackedTableBytes + 8;
  s.payload = c.stream.payload.size();
  s.total = s.header + s.coarse + s.quant_metadata + s.table + s.payload;
  return s;
}

std::vector<std::uint8_t> decode_payload(const CompressedContainer& c) {
  std::vector<std::uint8_t> bytes = huffman_decode(c.stream);
  const std::size_t expected = parameter_count(c.arch) * (c.quantized() ? 1 : 4);
  if (bytes.size() != expected) {
    throw FormatError("payload decodes to " + std::to_string(bytes.size()) + " bytes, the header implies " +
                      std::to_string(expected));
  }
  return bytes;
}

InrParams container_params(const CompressedContainer& c) {
  const std::vector<std::uint8_t> bytes = decode_payload(c);
  if (c.quantized()) return dequantize(assemble_quantized(c.arch, c.ranges, bytes));
  InrParams params(c.arch);
  auto& v = params.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= std::uint32_t{bytes[4 * i + b]} << (8 * b);
    const float x = std::bit_cast<float>(u);
    if (!std::isfinite(x)) throw FormatError("non-finite network parameter in payload");
    v[i] = x;
  }
  return params;
}

InspectReport inspect(const CompressedContainer& c) {
  InspectReport r;
  r.sizes = container_sizes(c);
  r.parameters = parameter_count(c.arch);
  r.coarse_vertices = c.coarse_vertex_count();
  r.coarse_faces = c.coarse_face_count();
  r.decoded_faces = r.coarse_faces << (2 * c.levels);
  const std::vector<std::uint8_t> bytes = decode_payload(c);
  r.bits_per_symbol = c.stream.bits_per_symbol(bytes.size());
  const std::vector<TensorInfo> layout = tensor_layout(c.arch);
  const InrParams params = container_params(c);
  for (std::size_t t = 0; t < layout.size(); ++t) {
    if (layout[t].kind != TensorKind::Weight) continue;
    r.weights += layout[t].size();
    if (c.quantized()) {
      const auto [lo, hi] = c.ranges[t];
      const std::uint8_t zero = quantize_value(0.0, lo, hi);
      for (std::size_t i = 0; i < layout[t].size(); ++i) r.zero_weights += bytes[layout[t].offset + i] == zero;
    } else {
      for (std::size_t i = 0; i < layout[t].size(); ++i) r.zero_weights += params.values()[layout[t].offset + i] == 0.0;
    }
  }
  r.weight_sparsity = r.weights ? static_cast<double>(r.zero_weights) / static_cast<double>(r.weights) : 0.0;
  return r;
}

}  // namespace nmc
