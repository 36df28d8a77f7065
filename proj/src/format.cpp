#include "flexq/format.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <cstring>
#include <fstream>
#include <string>
#include <system_error>
#include <unistd.h>

#include "flexq/error.hpp"

namespace flexq::flxq {

namespace {

class Writer {
 public:
  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) { le(v, 2); }
  void u32(uint32_t v) { le(v, 4); }
  void u64(uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void bytes(const char* s, std::size_t n) { out_.insert(out_.end(), s, s + n); }
  std::vector<uint8_t> take() { return std::move(out_); }

 private:
  void le(uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  uint8_t u8(const char* field) { return static_cast<uint8_t>(le(1, field)); }
  uint16_t u16(const char* field) { return static_cast<uint16_t>(le(2, field)); }
  uint32_t u32(const char* field) { return static_cast<uint32_t>(le(4, field)); }
  uint64_t u64(const char* field) { return le(8, field); }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }

  void expect_exact(uint64_t bytes, const char* what) {
    if (bytes != remaining()) {
      throw FormatError(std::string(what) + " needs " + std::to_string(bytes) + " bytes, file has " +
                            std::to_string(remaining()),
                        pos_);
    }
  }

 private:
  uint64_t le(int n, const char* field) {
    if (remaining() < static_cast<std::size_t>(n)) {
      throw FormatError(std::string("truncated while reading ") + field, pos_);
    }
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const uint8_t> in_;
  std::size_t pos_ = 0;
};

void header(Writer& w, Kind kind, DType dtype, std::size_t rows, std::size_t cols) {
  if (rows > UINT32_MAX || cols > UINT32_MAX) fail(ErrorKind::InvalidInput, "tensor too large for FLXQ");
  w.bytes("FLXQ", 4);
  w.u16(kVersion);
  w.u8(static_cast<uint8_t>(kind));
  w.u8(static_cast<uint8_t>(dtype));
  w.u32(static_cast<uint32_t>(rows));
  w.u32(static_cast<uint32_t>(cols));
}

struct Header {
  Kind kind;
  DType dtype;
  uint32_t rows;
  uint32_t cols;
};

Header read_header(Reader& r, std::span<const uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FLXQ", 4) != 0) {
    throw FormatError("bad magic, expected \"FLXQ\"", 0);
  }
  for (int i = 0; i < 4; ++i) r.u8("magic");
  const std::size_t version_at = r.offset();
  const uint16_t version = r.u16("version");
  if (version != kVersion) {
    throw FormatError("unsupported FLXQ version " + std::to_string(version), version_at);
  }
  const std::size_t kind_at = r.offset();
  const uint8_t kind = r.u8("kind");
  if (kind > 2) throw FormatError("unknown kind code " + std::to_string(kind), kind_at);
  const uint8_t dtype = r.u8("dtype");
  if (dtype > 3) throw FormatError("unknown dtype code " + std::to_string(dtype), kind_at + 1);
  Header h{static_cast<Kind>(kind), static_cast<DType>(dtype), 0, 0};
  h.rows = r.u32("rows");
  h.cols = r.u32("cols");
  return h;
}

void expect_dtype(const Header& h, DType want, std::size_t at) {
  if (h.dtype != want) throw FormatError("dtype code does not match the tensor kind", at);
}

FloatTensor read_float(Reader& r, const Header& h) {
  expect_dtype(h, DType::F32, 7);
  const uint64_t n = uint64_t{h.rows} * h.cols;
  r.expect_exact(n * 4, "float payload");
  FloatTensor t(h.rows, h.cols);
  for (float& v : t.data) v = r.f32("float payload");
  return t;
}

QuantTensor read_quant(Reader& r, const Header& h) {
  expect_dtype(h, DType::I8, 7);
  QuantTensor q;
  q.rows = h.rows;
  q.cols = h.cols;
  const std::size_t bits_at = r.offset();
  q.bits = r.u8("bits");
  if (q.bits < kMinBits || q.bits > kMaxBits) throw FormatError("bit-width outside [2, 8]", bits_at);
  const uint8_t axis = r.u8("group_axis");
  if (axis != 1) throw FormatError("only column-axis groups are supported", bits_at + 1);
  const uint8_t scale_dtype = r.u8("scale_dtype");
  if (scale_dtype != 0) throw FormatError("unknown scale dtype", bits_at + 2);
  r.u8("reserved");
  const std::size_t group_at = r.offset();
  const uint32_t group = r.u32("group_size");
  if (group == 0 || group > INT32_MAX) throw FormatError("invalid group size", group_at);
  q.group_size = static_cast<int>(group);
  const std::size_t count_at = r.offset();
  const uint32_t scale_count = r.u32("scale_count");
  if (scale_count != q.rows * q.groups_per_row()) {
    throw FormatError("scale count " + std::to_string(scale_count) + " does not match shape and group size",
                      count_at);
  }
  const uint64_t n = uint64_t{h.rows} * h.cols;
  r.expect_exact(n + uint64_t{scale_count} * 4, "quant payload");
  const int limit = qmax(q.bits);
  q.values.resize(n);
  for (auto& v : q.values) {
    const std::size_t at = r.offset();
    v = static_cast<int8_t>(r.u8("values"));
    if (v > limit || v < -limit) throw FormatError("value outside symmetric range", at);
  }
  q.scales.resize(scale_count);
  for (auto& s : q.scales) {
    const std::size_t at = r.offset();
    s = r.f32("scales");
    if (!(s > 0.0f) || s == std::numeric_limits<float>::infinity()) throw FormatError("non-positive scale", at);
  }
  return q;
}

PackedTensor read_packed(Reader& r, const Header& h) {
  if (h.dtype != DType::U32Words && h.dtype != DType::U64Words) {
    throw FormatError("dtype code does not match the tensor kind", 7);
  }
  PackedTensor p;
  p.rows = h.rows;
  p.cols = h.cols;
  const std::size_t cfg_at = r.offset();
  p.config.chunk_m = static_cast<int>(r.u32("chunk_m"));
  p.config.chunk_k = static_cast<int>(r.u32("chunk_k"));
  p.config.mma_m = static_cast<int>(r.u32("mma_m"));
  p.config.mma_n = static_cast<int>(r.u32("mma_n"));
  p.config.mma_k = static_cast<int>(r.u32("mma_k"));
  p.config.word_bits = static_cast<int>(r.u32("word_bits"));
  try {
    p.config.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("invalid pack config: ") + e.what(), cfg_at);
  }
  if ((p.config.word_bits == 32) != (h.dtype == DType::U32Words)) {
    throw FormatError("word dtype disagrees with word_bits", 7);
  }
  const std::size_t bits_at = r.offset();
  p.bits = r.u8("bits");
  if (p.bits < 1 || p.bits > 16) throw FormatError("invalid plane count", bits_at);
  const uint8_t sign = r.u8("signedness");
  if (sign > 1) throw FormatError("invalid signedness code", bits_at + 1);
  p.signedness = sign ? Signedness::TwosComplement : Signedness::Unsigned;
  r.u16("reserved");
  const std::size_t pad_at = r.offset();
  p.padded_rows = r.u32("padded_rows");
  p.padded_cols = r.u32("padded_cols");
  const auto cm = static_cast<std::size_t>(p.config.chunk_m);
  const auto ck = static_cast<std::size_t>(p.config.chunk_k);
  auto round_up = [](std::size_t v, std::size_t m) { return (std::max<std::size_t>(v, 1) + m - 1) / m * m; };
  if (p.padded_rows != round_up(p.rows, cm) || p.padded_cols != round_up(p.cols, ck)) {
    throw FormatError("padding metadata inconsistent with shape and chunk dims", pad_at);
  }
  const std::size_t count_at = r.offset();
  const uint64_t count = r.u64("word_count");
  const uint64_t expected = uint64_t{p.padded_rows} * p.padded_cols * static_cast<uint64_t>(p.bits) /
                            static_cast<uint64_t>(p.config.word_bits);
  if (count != expected) throw FormatError("word count does not match padded shape", count_at);
  const uint64_t word_bytes = static_cast<uint64_t>(p.config.word_bits) / 8;
  r.expect_exact(count * word_bytes, "word payload");
  p.words.resize(count);
  for (auto& w : p.words) w = word_bytes == 8 ? r.u64("words") : r.u32("words");
  return p;
}

}  // namespace

std::vector<uint8_t> encode(const FloatTensor& t) {
  t.validate();
  Writer w;
  header(w, Kind::FloatTensor, DType::F32, t.rows, t.cols);
  for (float v : t.data) w.f32(v);
  return w.take();
}

std::vector<uint8_t> encode(const QuantTensor& q) {
  q.validate();
  Writer w;
  header(w, Kind::QuantTensor, DType::I8, q.rows, q.cols);
  w.u8(static_cast<uint8_t>(q.bits));
  w.u8(1);  // groups run along columns
  w.u8(0);  // f32 scales
  w.u8(0);
  w.u32(static_cast<uint32_t>(q.group_size));
  w.u32(static_cast<uint32_t>(q.scales.size()));
  for (int8_t v : q.values) w.u8(static_cast<uint8_t>(v));
  for (float s : q.scales) w.f32(s);
  return w.take();
}

std::vector<uint8_t> encode(const PackedTensor& p) {
  Writer w;
  header(w, Kind::PackedTensor, p.config.word_bits == 32 ? DType::U32Words : DType::U64Words, p.rows, p.cols);
  for (int v : {p.config.chunk_m, p.config.chunk_k, p.config.mma_m, p.config.mma_n, p.config.mma_k,
                p.config.word_bits}) {
    w.u32(static_cast<uint32_t>(v));
  }
  w.u8(static_cast<uint8_t>(p.bits));
  w.u8(p.signedness == Signedness::TwosComplement ? 1 : 0);
  w.u16(0);
  w.u32(static_cast<uint32_t>(p.padded_rows));
  w.u32(static_cast<uint32_t>(p.padded_cols));
  w.u64(p.words.size());
  for (uint64_t word : p.words) {
    if (p.config.word_bits == 32) {
      w.u32(static_cast<uint32_t>(word));
    } else {
      w.u64(word);
    }
  }
  return w.take();
}

Object decode(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  const Header h = read_header(r, bytes);
  switch (h.kind) {
    case Kind::FloatTensor: return read_float(r, h);
    case Kind::QuantTensor: return read_quant(r, h);
    case Kind::PackedTensor: return read_packed(r, h);
  }
  throw FormatError("unknown kind", 6);
}

namespace {

template <typename T>
T decode_as(std::span<const uint8_t> bytes, const char* name) {
  Object obj = decode(bytes);
  if (auto* v = std::get_if<T>(&obj)) return std::move(*v);
  throw FormatError(std::string("expected a ") + name + " file", 6);
}

}  // namespace

FloatTensor decode_float(std::span<const uint8_t> bytes) { return decode_as<FloatTensor>(bytes, "float tensor"); }
QuantTensor decode_quant(std::span<const uint8_t> bytes) { return decode_as<QuantTensor>(bytes, "quant tensor"); }
PackedTensor decode_packed(std::span<const uint8_t> bytes) { return decode_as<PackedTensor>(bytes, "packed tensor"); }

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::InvalidInput, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      fail(ErrorKind::InvalidInput, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    fail(ErrorKind::InvalidInput, "cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

uint64_t fnv1a64(std::span<const uint8_t> bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace flexq::flxq
