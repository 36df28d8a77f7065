#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "flexq/quantizer.hpp"
#include "flexq/tensor.hpp"

namespace flexq {

struct LayerDump {
  std::string layer_name;
  LayerKind layer_kind = LayerKind::Generic;
  FloatTensor weight;       // [N, K]
  FloatTensor activations;  // [tokens, K]

  void validate() const;
};

// SQNR reported for an all-zero reference output.
inline constexpr double kSqnrSentinel = std::numeric_limits<double>::infinity();

struct LayerError {
  double sqnr_db = 0.0;
  double output_mse = 0.0;
};

struct LayerSensitivity {
  std::string layer_name;
  LayerKind layer_kind = LayerKind::Generic;
  double sqnr_db = 0.0;
  double output_mse = 0.0;
  double outlier_score = 0.0;  // max channel max-abs / median channel max-abs
};

struct SensitivityReport {
  int weight_bits = 6;
  int activation_bits = 6;
  int group_size = kDefaultGroupSize;
  std::vector<LayerSensitivity> layers;  // input order
  std::vector<std::size_t> ranking;      // indices into layers, most sensitive first
};

/// Quantizes both operands, runs the bit-serial GEMM and compares against X * W^T in double.
LayerError layer_error(const LayerDump& dump, int w_bits, int a_bits, int group_size = kDefaultGroupSize);

double outlier_score(const FloatTensor& activations);

// Ranks by ascending SQNR; ties go to the lexicographically smaller layer name.
SensitivityReport rank_layers(const std::vector<LayerDump>& dumps, int w_bits, int a_bits,
                              int group_size = kDefaultGroupSize, int workers = 1);

// The budget_k most sensitive layers get high_bits activations, everything else 6. A layer
// kind is promoted when any of its layers is promoted.
BitPolicy assign_policy(const SensitivityReport& report, int high_bits, std::size_t budget_k);

struct GluFixtureOptions {
  std::size_t tokens = 16;
  std::size_t hidden = 256;        // K of qkv/o/gate/up
  std::size_t intermediate = 512;  // K of down_proj
  double outlier_factor = 100.0;
  bool with_outlier = true;
};

// Synthetic GLU block (qkv_proj, o_proj, gate_proj, up_proj, down_proj). down_proj sees
// heavy-tailed inputs with one channel scaled by outlier_factor.
std::vector<LayerDump> make_glu_fixture(uint64_t seed, const GluFixtureOptions& options = {});

}  // namespace flexq
