#include "flexq/tensor.hpp"

#include <cmath>
#include <string>

#include "flexq/error.hpp"

namespace flexq {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::PolicyMiss: return "policy-miss";
    case ErrorKind::Index: return "index";
    case ErrorKind::Format: return "format";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Config: return "config";
    case ErrorKind::Bounds: return "bounds";
  }
  return "unknown";
}

FloatTensor::FloatTensor(std::size_t r, std::size_t c, std::vector<float> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != rows * cols) {
    fail(ErrorKind::InvalidInput, "tensor data length " + std::to_string(data.size()) +
                                      " does not match shape " + std::to_string(rows) + "x" +
                                      std::to_string(cols));
  }
}

void FloatTensor::validate() const {
  if (data.size() != rows * cols) fail(ErrorKind::InvalidInput, "tensor data length mismatch");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      fail(ErrorKind::InvalidInput, "non-finite value at flat index " + std::to_string(i));
    }
  }
}

}  // namespace flexq
