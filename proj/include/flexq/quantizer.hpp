#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flexq/tensor.hpp"

namespace flexq {

inline constexpr int kDefaultGroupSize = 128;
inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 8;

// Largest magnitude a symmetric b-bit quantizer emits: 2^(b-1) - 1.
constexpr int qmax(int bits) { return (1 << (bits - 1)) - 1; }

enum class ScaleStorage {
  Float32,
  // Scales rounded to IEEE binary16 before use, mirroring half-precision scale buffers.
  Float16,
};

// Integer tensor with one positive scale per (row, group). Groups run along the columns,
// which is the contraction axis K for both weights [N, K] and activations [M, K].
struct QuantTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  int bits = 6;
  int group_size = kDefaultGroupSize;
  std::vector<int8_t> values;  // row-major, |v| <= qmax(bits)
  std::vector<float> scales;   // [rows][groups_per_row()]

  std::size_t groups_per_row() const noexcept {
    return group_size > 0 ? (cols + group_size - 1) / static_cast<std::size_t>(group_size) : 0;
  }
  int8_t value(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  float scale(std::size_t r, std::size_t c) const {
    return scales[r * groups_per_row() + c / static_cast<std::size_t>(group_size)];
  }

  // Checks every structural invariant; throws InvalidInput/Shape on violation.
  void validate() const;

  bool operator==(const QuantTensor&) const = default;
};

struct QuantizeOptions {
  ScaleStorage scale_storage = ScaleStorage::Float32;
};

/// Scale shared by one group: max|x| / (2^(bits-1) - 1), or 1.0 for an all-zero group.
float compute_group_scale(std::span<const float> group, int bits);

QuantTensor quantize(const FloatTensor& t, int bits, int group_size = kDefaultGroupSize,
                     QuantizeOptions options = {});

FloatTensor dequantize(const QuantTensor& q);

// Nearest binary16 value (round-to-nearest-even), returned as float.
float round_to_half(float x);

enum class LayerKind { QkvProj, OProj, GateProj, UpProj, DownProj, Generic };

inline constexpr LayerKind kAllLayerKinds[] = {LayerKind::QkvProj, LayerKind::OProj,
                                               LayerKind::GateProj, LayerKind::UpProj,
                                               LayerKind::DownProj, LayerKind::Generic};

std::string_view to_string(LayerKind kind);
// Throws InvalidInput for names outside the enum.
LayerKind parse_layer_kind(std::string_view name);

struct BitPolicy {
  int weight_bits = 6;
  std::map<LayerKind, int> activation_bits_by_layer;

  // W6 everywhere, A8 only for down_proj.
  static BitPolicy flexq_default();
  static BitPolicy uniform(int activation_bits = 6);

  void validate() const;
  bool operator==(const BitPolicy&) const = default;
};

enum class Architecture { Glu, NonGlu };

// Non-GLU models (OPT-style) fall back to uniform W6A6.
BitPolicy policy_for(Architecture arch);

/// Activation bit-width for a layer kind; throws PolicyMiss if the policy has no entry.
int activation_bits(LayerKind kind, const BitPolicy& policy);

}  // namespace flexq
