#include "flexq/bitpack.hpp"

#include <algorithm>
#include <string>

#include "flexq/error.hpp"

namespace flexq {

int64_t plane_coeff(int s, int bits, Signedness signedness) {
  if (bits < 1 || bits > 32 || s < 0 || s >= bits) {
    fail(ErrorKind::Index, "plane index " + std::to_string(s) + " out of range for " +
                               std::to_string(bits) + "-bit values");
  }
  const int64_t weight = int64_t{1} << s;
  if (signedness == Signedness::TwosComplement && s == bits - 1) return -weight;
  return weight;
}

std::vector<int64_t> BitPlaneSet::coeffs() const {
  std::vector<int64_t> out(static_cast<std::size_t>(bits));
  for (int s = 0; s < bits; ++s) out[s] = plane_coeff(s, bits, signedness);
  return out;
}

BitPlaneSet decompose(std::span<const int32_t> values, std::size_t rows, std::size_t cols, int bits,
                      Signedness signedness) {
  if (bits < 1 || bits > 16) fail(ErrorKind::InvalidInput, "unsupported bit-width for decomposition");
  if (values.size() != rows * cols) fail(ErrorKind::Shape, "value count does not match shape");
  const int64_t lo = signedness == Signedness::Unsigned ? 0 : -(int64_t{1} << (bits - 1));
  const int64_t hi = signedness == Signedness::Unsigned ? (int64_t{1} << bits) - 1
                                                       : (int64_t{1} << (bits - 1)) - 1;
  BitPlaneSet bp;
  bp.rows = rows;
  bp.cols = cols;
  bp.bits = bits;
  bp.signedness = signedness;
  bp.planes.assign(static_cast<std::size_t>(bits), std::vector<uint8_t>(values.size(), 0));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int32_t v = values[i];
    if (v < lo || v > hi) {
      fail(ErrorKind::InvalidInput, "value " + std::to_string(v) + " not representable in " +
                                        std::to_string(bits) + " bits");
    }
    // Low b bits of the two's-complement encoding (identity for unsigned values).
    const auto enc = static_cast<uint32_t>(v);
    for (int s = 0; s < bits; ++s) bp.planes[s][i] = static_cast<uint8_t>((enc >> s) & 1u);
  }
  return bp;
}

BitPlaneSet decompose(const QuantTensor& q) {
  std::vector<int32_t> widened(q.values.begin(), q.values.end());
  return decompose(widened, q.rows, q.cols, q.bits, Signedness::TwosComplement);
}

std::vector<int32_t> recompose(const BitPlaneSet& bp) {
  const auto coeff = bp.coeffs();
  std::vector<int32_t> out(bp.rows * bp.cols, 0);
  for (int s = 0; s < bp.bits; ++s) {
    const auto& plane = bp.planes[s];
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] += static_cast<int32_t>(coeff[s] * plane[i]);
    }
  }
  return out;
}

void PackConfig::validate() const {
  if (word_bits != 32 && word_bits != 64) fail(ErrorKind::Config, "word_bits must be 32 or 64");
  if (chunk_k <= 0 || chunk_k % word_bits != 0) {
    fail(ErrorKind::Config, "chunk_k " + std::to_string(chunk_k) + " is not a multiple of word_bits");
  }
  if (chunk_m < 1 || chunk_m > mma_m) {
    fail(ErrorKind::Config, "chunk_m " + std::to_string(chunk_m) + " must lie in [1, mma_m]");
  }
  if (mma_m < 1 || mma_n < 1 || mma_k < 1) fail(ErrorKind::Config, "MMA dimensions must be positive");
}

PackConfig PackConfig::for_activations(std::size_t m, int word_bits) {
  PackConfig cfg;
  cfg.word_bits = word_bits;
  cfg.chunk_m = static_cast<int>(std::clamp<std::size_t>(m, 1, static_cast<std::size_t>(cfg.mma_m)));
  return cfg;
}

PackConfig PackConfig::for_weights(int word_bits) {
  PackConfig cfg;
  cfg.word_bits = word_bits;
  cfg.chunk_m = cfg.mma_n;
  return cfg;
}

namespace {

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

}  // namespace

PackedTensor pack(const BitPlaneSet& bp, const PackConfig& cfg) {
  cfg.validate();
  PackedTensor p;
  p.config = cfg;
  p.bits = bp.bits;
  p.signedness = bp.signedness;
  p.rows = bp.rows;
  p.cols = bp.cols;
  p.padded_rows = round_up(std::max<std::size_t>(bp.rows, 1), static_cast<std::size_t>(cfg.chunk_m));
  p.padded_cols = round_up(std::max<std::size_t>(bp.cols, 1), static_cast<std::size_t>(cfg.chunk_k));
  p.words.assign(p.padded_rows * p.padded_cols * static_cast<std::size_t>(bp.bits) / cfg.word_bits, 0);

  const auto cm = static_cast<std::size_t>(cfg.chunk_m);
  const auto ck = static_cast<std::size_t>(cfg.chunk_k);
  const auto wb = static_cast<std::size_t>(cfg.word_bits);
  for (int s = 0; s < bp.bits; ++s) {
    const auto& plane = bp.planes[s];
    for (std::size_t row = 0; row < bp.rows; ++row) {
      for (std::size_t col = 0; col < bp.cols; ++col) {
        if (!plane[row * bp.cols + col]) continue;
        const std::size_t within = col % ck;
        const std::size_t idx = p.word_index(col / ck, row / cm, s, row % cm, within / wb);
        p.words[idx] |= uint64_t{1} << (within % wb);
      }
    }
  }
  return p;
}

BitPlaneSet unpack(const PackedTensor& p, const PackConfig& cfg) {
  if (!(p.config == cfg)) fail(ErrorKind::Format, "pack config does not match the packed tensor");
  cfg.validate();
  const auto cm = static_cast<std::size_t>(cfg.chunk_m);
  const auto ck = static_cast<std::size_t>(cfg.chunk_k);
  const auto wb = static_cast<std::size_t>(cfg.word_bits);
  if (p.padded_rows % cm != 0 || p.padded_cols % ck != 0 || p.rows > p.padded_rows ||
      p.cols > p.padded_cols || p.bits < 1) {
    fail(ErrorKind::Format, "inconsistent padding metadata");
  }
  if (p.words.size() != p.padded_rows * p.padded_cols * static_cast<std::size_t>(p.bits) / wb) {
    fail(ErrorKind::Format, "word payload size does not match metadata");
  }

  BitPlaneSet bp;
  bp.rows = p.rows;
  bp.cols = p.cols;
  bp.bits = p.bits;
  bp.signedness = p.signedness;
  bp.planes.assign(static_cast<std::size_t>(p.bits), std::vector<uint8_t>(p.rows * p.cols, 0));
  for (int s = 0; s < p.bits; ++s) {
    for (std::size_t row = 0; row < p.rows; ++row) {
      for (std::size_t col = 0; col < p.cols; ++col) {
        const std::size_t within = col % ck;
        const uint64_t word = p.words[p.word_index(col / ck, row / cm, s, row % cm, within / wb)];
        bp.planes[s][row * p.cols + col] = static_cast<uint8_t>((word >> (within % wb)) & 1u);
      }
    }
  }
  return bp;
}

}  // namespace flexq
