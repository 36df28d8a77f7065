#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flexq/bitpack.hpp"
#include "flexq/quantizer.hpp"
#include "flexq/tensor.hpp"

namespace flexq {

// Problem shape and execution knobs for Y[M, N] = X[M, K] * W[N, K]^T.
struct GemmConfig {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  int weight_bits = 6;      // p
  int activation_bits = 6;  // q
  int group_size = kDefaultGroupSize;
  int tile_m = 0;  // 0 picks the largest multiple of chunk_m not above 8
  int tile_n = 64;
  int tile_k = 512;
  int pipeline_stages = 1;
  int worker_count = 1;
  bool trace = false;  // record per-group integer partials in GemmOutput

  // Shape, bits and group size taken from the quantized operands.
  static GemmConfig for_operands(const QuantTensor& weights, const QuantTensor& activations);

  std::size_t groups() const { return (k + group_size - 1) / static_cast<std::size_t>(group_size); }
  void validate() const;
};

// Y^(s,t) for every (weight plane s, activation plane t, output cell).
struct BitProductGrid {
  int p = 0;
  int q = 0;
  std::size_t cells = 0;
  std::vector<int32_t> partials;  // [s][t][cell]

  BitProductGrid() = default;
  BitProductGrid(int p_bits, int q_bits, std::size_t cell_count)
      : p(p_bits), q(q_bits), cells(cell_count),
        partials(static_cast<std::size_t>(p_bits) * q_bits * cell_count, 0) {}

  int32_t& at(int s, int t, std::size_t cell) { return partials[(static_cast<std::size_t>(s) * q + t) * cells + cell]; }
  int32_t at(int s, int t, std::size_t cell) const {
    return partials[(static_cast<std::size_t>(s) * q + t) * cells + cell];
  }
};

struct GemmOutput {
  FloatTensor data;  // [M, N], unpadded
  uint64_t bmma_passes = 0;
  // Present when GemmConfig::trace is set: exact integer partial per (m, n, group).
  std::vector<int64_t> group_partials;
};

/// Binary multiply-accumulate of one chunk row pair: sum of popcount(w & x).
int32_t bmma_chunk(std::span<const uint64_t> w_words, std::span<const uint64_t> x_words);

// Bit-significance reduction: Y = sum_s sum_t coeff_p(s) * coeff_q(t) * Y^(s,t).
std::vector<int64_t> reduce_bits(const BitProductGrid& grid, int p, int q, Signedness signedness);
void reduce_bits_into(const BitProductGrid& grid, Signedness w_sign, Signedness x_sign,
                      std::span<int64_t> out);

// Rounds needed to fold mma_m lanes down to chunk_m lanes: log2(mma_m) - log2(chunk_m).
int fold_rounds(int chunk_m, int mma_m);

// Tree-folds lane rows in place. lanes holds mma_m rows of `width` values; in round i row j
// accumulates row j + mma_m / 2^(i+1). Afterwards rows [0, chunk_m) hold the per-row sums over
// all lane groups. Returns the number of rounds performed.
int fold_chunk_level(std::span<int64_t> lanes, std::size_t width, int chunk_m, int mma_m);

/// Fused bit-serial GEMM with group-wise dequantization, single worker, no tiling.
/// Scales are [N][groups] for weights and [M][groups] for activations; the scale
/// multiply-accumulate runs in double precision in ascending group order.
GemmOutput group_matmul_fused(const PackedTensor& weights, const PackedTensor& activations,
                              std::span<const float> w_scales, std::span<const float> x_scales,
                              const GemmConfig& cfg);

// Independent oracle: direct integer dot products per group, same scale accumulation order.
GemmOutput int_matmul_reference(const QuantTensor& weights, const QuantTensor& activations,
                                const GemmConfig& cfg);

// Tiled executor with pipeline_stages prefetch buffers per worker. Bit-identical to
// group_matmul_fused for every worker_count and pipeline_stages.
GemmOutput execute_tiled(const PackedTensor& weights, const PackedTensor& activations,
                         std::span<const float> w_scales, std::span<const float> x_scales,
                         const GemmConfig& cfg);

// Packs both operands and runs execute_tiled.
GemmOutput quantized_matmul(const QuantTensor& weights, const QuantTensor& activations,
                            const GemmConfig& cfg, int word_bits = 64);

// Plain double-precision GEMM of float operands: Y = X * W^T.
FloatTensor float_matmul(const FloatTensor& weights, const FloatTensor& activations);

}  // namespace flexq
