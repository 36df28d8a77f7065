#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <random>

#include "flexq/quantizer.hpp"
#include "flexq/tensor.hpp"

namespace flexq::testing {

inline FloatTensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, float sigma = 1.0f) {
  std::normal_distribution<float> dist(0.0f, sigma);
  FloatTensor t(rows, cols);
  for (float& v : t.data) v = dist(rng);
  return t;
}

// Integer tensor with arbitrary positive scales; values cover the full symmetric range.
inline QuantTensor random_quant(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int bits,
                                int group = kDefaultGroupSize) {
  QuantTensor q;
  q.rows = rows;
  q.cols = cols;
  q.bits = bits;
  q.group_size = group;
  std::uniform_int_distribution<int> val(-qmax(bits), qmax(bits));
  std::uniform_real_distribution<float> scale(0.01f, 1.0f);
  q.values.resize(rows * cols);
  for (auto& v : q.values) v = static_cast<int8_t>(val(rng));
  q.scales.resize(rows * q.groups_per_row());
  for (auto& s : q.scales) s = scale(rng);
  return q;
}

inline bool bit_identical(const FloatTensor& a, const FloatTensor& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::equal(a.data.begin(), a.data.end(), b.data.begin(),
                    [](float x, float y) { return std::bit_cast<uint32_t>(x) == std::bit_cast<uint32_t>(y); });
}

}  // namespace flexq::testing
