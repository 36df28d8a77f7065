#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace flexq {

// Dense row-major matrix of model-space values.
struct FloatTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  FloatTensor() = default;
  FloatTensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
  FloatTensor(std::size_t r, std::size_t c, std::vector<float> values);

  std::size_t size() const noexcept { return data.size(); }
  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  // Throws InvalidInput on a size mismatch or a non-finite value.
  void validate() const;

  bool operator==(const FloatTensor&) const = default;
};

}  // namespace flexq
