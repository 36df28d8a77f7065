#include "flexq/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flexq/error.hpp"

namespace flexq {

namespace {

void check_bits(int bits) {
  if (bits < kMinBits || bits > kMaxBits) {
    fail(ErrorKind::InvalidInput, "bit-width " + std::to_string(bits) + " outside [2, 8]");
  }
}

}  // namespace

float round_to_half(float x) {
  if (!std::isfinite(x)) return x;
  constexpr float kHalfMax = 65504.0f;
  constexpr float kHalfMinSub = 5.9604644775390625e-8f;  // 2^-24
  const float mag = std::fabs(x);
  if (mag == 0.0f) return x;
  if (mag >= kHalfMax) return std::copysign(kHalfMax, x);
  int exp = 0;
  std::frexp(mag, &exp);  // mag in [2^(exp-1), 2^exp)
  // binary16 keeps 10 fraction bits; below 2^-14 the spacing is fixed at 2^-24.
  const float quantum = exp - 1 < -14 ? kHalfMinSub : std::ldexp(1.0f, exp - 1 - 10);
  const float rounded = std::nearbyint(mag / quantum) * quantum;
  return std::copysign(std::min(rounded, kHalfMax), x);
}

float compute_group_scale(std::span<const float> group, int bits) {
  check_bits(bits);
  if (group.empty()) fail(ErrorKind::InvalidInput, "empty quantization group");
  float max_abs = 0.0f;
  for (float v : group) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "non-finite value in quantization group");
    max_abs = std::max(max_abs, std::fabs(v));
  }
  if (max_abs == 0.0f) return 1.0f;
  return max_abs / static_cast<float>(qmax(bits));
}

QuantTensor quantize(const FloatTensor& t, int bits, int group_size, QuantizeOptions options) {
  check_bits(bits);
  if (group_size <= 0) fail(ErrorKind::InvalidInput, "group size must be positive");
  t.validate();

  QuantTensor q;
  q.rows = t.rows;
  q.cols = t.cols;
  q.bits = bits;
  q.group_size = group_size;
  q.values.resize(t.size());
  const std::size_t groups = q.groups_per_row();
  q.scales.resize(t.rows * groups);

  const float limit = static_cast<float>(qmax(bits));
  const auto gs = static_cast<std::size_t>(group_size);
  for (std::size_t r = 0; r < t.rows; ++r) {
    const auto row = t.row(r);
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t begin = g * gs;
      const std::size_t len = std::min(gs, t.cols - begin);
      float scale = compute_group_scale(row.subspan(begin, len), bits);
      if (options.scale_storage == ScaleStorage::Float16) {
        scale = std::max(round_to_half(scale), 5.9604644775390625e-8f);
      }
      q.scales[r * groups + g] = scale;
      for (std::size_t c = begin; c < begin + len; ++c) {
        // std::round rounds half away from zero.
        const float v = std::clamp(std::round(row[c] / scale), -limit, limit);
        q.values[r * t.cols + c] = static_cast<int8_t>(v);
      }
    }
  }
  return q;
}

FloatTensor dequantize(const QuantTensor& q) {
  q.validate();
  FloatTensor out(q.rows, q.cols);
  for (std::size_t r = 0; r < q.rows; ++r) {
    for (std::size_t c = 0; c < q.cols; ++c) {
      out.at(r, c) = static_cast<float>(q.value(r, c)) * q.scale(r, c);
    }
  }
  return out;
}

void QuantTensor::validate() const {
  check_bits(bits);
  if (group_size <= 0) fail(ErrorKind::InvalidInput, "group size must be positive");
  if (values.size() != rows * cols) fail(ErrorKind::Shape, "quant tensor value count mismatch");
  if (scales.size() != rows * groups_per_row()) {
    fail(ErrorKind::Shape, "expected " + std::to_string(rows * groups_per_row()) +
                               " scales, found " + std::to_string(scales.size()));
  }
  const int limit = qmax(bits);
  for (int8_t v : values) {
    if (v > limit || v < -limit) {
      fail(ErrorKind::InvalidInput, "quantized value " + std::to_string(v) +
                                        " outside symmetric " + std::to_string(bits) + "-bit range");
    }
  }
  for (float s : scales) {
    if (!(s > 0.0f) || !std::isfinite(s)) fail(ErrorKind::InvalidInput, "scale must be finite and > 0");
  }
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::QkvProj: return "qkv_proj";
    case LayerKind::OProj: return "o_proj";
    case LayerKind::GateProj: return "gate_proj";
    case LayerKind::UpProj: return "up_proj";
    case LayerKind::DownProj: return "down_proj";
    case LayerKind::Generic: return "generic";
  }
  return "generic";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (LayerKind k : kAllLayerKinds) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorKind::InvalidInput, "unknown layer kind '" + std::string(name) + "'");
}

BitPolicy BitPolicy::flexq_default() {
  BitPolicy p = uniform(6);
  p.activation_bits_by_layer[LayerKind::DownProj] = 8;
  return p;
}

BitPolicy BitPolicy::uniform(int activation_bits) {
  BitPolicy p;
  for (LayerKind k : kAllLayerKinds) p.activation_bits_by_layer[k] = activation_bits;
  return p;
}

void BitPolicy::validate() const {
  if (weight_bits != 6) fail(ErrorKind::InvalidInput, "weights are quantized to 6 bits in every layer");
  for (const auto& [kind, bits] : activation_bits_by_layer) {
    if (bits != 6 && bits != 8) {
      fail(ErrorKind::InvalidInput,
           std::string(to_string(kind)) + " maps to " + std::to_string(bits) + " bits, expected 6 or 8");
    }
  }
}

BitPolicy policy_for(Architecture arch) {
  return arch == Architecture::Glu ? BitPolicy::flexq_default() : BitPolicy::uniform(6);
}

int activation_bits(LayerKind kind, const BitPolicy& policy) {
  const auto it = policy.activation_bits_by_layer.find(kind);
  if (it == policy.activation_bits_by_layer.end()) {
    fail(ErrorKind::PolicyMiss, "no activation bit-width for layer kind '" +
                                    std::string(to_string(kind)) + "'");
  }
  return it->second;
}

}  // namespace flexq
