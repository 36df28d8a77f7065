#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "flexq/bitpack.hpp"
#include "flexq/quantizer.hpp"
#include "flexq/tensor.hpp"

// FLXQ container. Every multi-byte field is little-endian; layout in docs/format.md.
//
//   offset  size  field
//   0       4     magic "FLXQ"
//   4       2     version (1)
//   6       1     kind: 0 float tensor, 1 quant tensor, 2 packed tensor
//   7       1     dtype: 0 f32, 1 i8, 2 u32 words, 3 u64 words
//   8       4     rows
//   12      4     cols
//   16      ...   kind-specific block and payload
namespace flexq::flxq {

inline constexpr uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;

enum class Kind : uint8_t { FloatTensor = 0, QuantTensor = 1, PackedTensor = 2 };
enum class DType : uint8_t { F32 = 0, I8 = 1, U32Words = 2, U64Words = 3 };

using Object = std::variant<FloatTensor, QuantTensor, PackedTensor>;

std::vector<uint8_t> encode(const FloatTensor& t);
std::vector<uint8_t> encode(const QuantTensor& q);
std::vector<uint8_t> encode(const PackedTensor& p);

// Throws FormatError (with byte offset) on any malformed or unsupported input.
Object decode(std::span<const uint8_t> bytes);
FloatTensor decode_float(std::span<const uint8_t> bytes);
QuantTensor decode_quant(std::span<const uint8_t> bytes);
PackedTensor decode_packed(std::span<const uint8_t> bytes);

std::vector<uint8_t> read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const uint8_t> bytes);

template <typename T>
void save(const std::filesystem::path& path, const T& object) {
  write_file_atomic(path, encode(object));
}

// 64-bit FNV-1a digest, used to fingerprint inputs in run manifests.
uint64_t fnv1a64(std::span<const uint8_t> bytes);

}  // namespace flexq::flxq
