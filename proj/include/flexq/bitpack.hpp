#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flexq/quantizer.hpp"

namespace flexq {

enum class Signedness { Unsigned, TwosComplement };

// Binary planes of a b-bit integer matrix. Plane s holds bit s of every element's
// b-bit encoding; planes[s] is row-major with entries in {0, 1}.
struct BitPlaneSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  int bits = 0;
  Signedness signedness = Signedness::TwosComplement;
  std::vector<std::vector<uint8_t>> planes;

  uint8_t bit(int s, std::size_t r, std::size_t c) const { return planes[s][r * cols + c]; }
  std::vector<int64_t> coeffs() const;

  bool operator==(const BitPlaneSet&) const = default;
};

/// Signed weight of plane s: 2^s, except -2^(b-1) for the two's-complement MSB.
int64_t plane_coeff(int s, int bits, Signedness signedness);

BitPlaneSet decompose(const QuantTensor& q);
// Generic entry point; unsigned mode requires 0 <= v < 2^bits.
BitPlaneSet decompose(std::span<const int32_t> values, std::size_t rows, std::size_t cols, int bits,
                      Signedness signedness);

// Sum of coeff[s] * plane[s] per element.
std::vector<int32_t> recompose(const BitPlaneSet& bp);

// Tiling of one packed operand. chunk_m is the row count of a chunk: min(M, mma_m) for
// activations and mma_n for weights.
struct PackConfig {
  int chunk_m = 8;
  int chunk_k = 128;
  int mma_m = 8;
  int mma_n = 8;
  int mma_k = 128;
  int word_bits = 64;

  int words_per_chunk_row() const { return chunk_k / word_bits; }
  void validate() const;

  static PackConfig for_activations(std::size_t m, int word_bits = 64);
  static PackConfig for_weights(int word_bits = 64);

  bool operator==(const PackConfig&) const = default;
};

// Word-packed planes with logical shape
//   [K/chunk_k, R/chunk_m, bits, chunk_m, chunk_k/word_bits].
// Bit k of a chunk row lives in word k / word_bits at bit position k % word_bits. With
// word_bits = 32 only the low half of each stored word is used.
struct PackedTensor {
  PackConfig config;
  int bits = 0;
  Signedness signedness = Signedness::TwosComplement;
  std::size_t rows = 0;         // before padding
  std::size_t cols = 0;         // K before padding
  std::size_t padded_rows = 0;  // multiple of chunk_m
  std::size_t padded_cols = 0;  // multiple of chunk_k
  std::vector<uint64_t> words;

  std::size_t k_chunks() const { return padded_cols / config.chunk_k; }
  std::size_t row_chunks() const { return padded_rows / config.chunk_m; }

  // Flat word index of (k-chunk, row-chunk, plane, row-in-chunk, word-in-chunk).
  std::size_t word_index(std::size_t kc, std::size_t rc, int s, std::size_t r, std::size_t w) const {
    const auto wpc = static_cast<std::size_t>(config.words_per_chunk_row());
    return (((kc * row_chunks() + rc) * bits + s) * config.chunk_m + r) * wpc + w;
  }

  // The chunk_k bits of one (k-chunk, row-chunk, plane, row) tuple.
  std::span<const uint64_t> chunk_row(std::size_t kc, std::size_t rc, int s, std::size_t r) const {
    return {words.data() + word_index(kc, rc, s, r, 0),
            static_cast<std::size_t>(config.words_per_chunk_row())};
  }

  bool operator==(const PackedTensor&) const = default;
};

PackedTensor pack(const BitPlaneSet& bp, const PackConfig& cfg);
BitPlaneSet unpack(const PackedTensor& p, const PackConfig& cfg);

inline PackedTensor pack(const QuantTensor& q, const PackConfig& cfg) { return pack(decompose(q), cfg); }

}  // namespace flexq
