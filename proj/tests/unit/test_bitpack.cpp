#include <random>

#include "doctest.h"
#include "flexq/bitpack.hpp"
#include "flexq/error.hpp"
#include "helpers.hpp"

using namespace flexq;

TEST_CASE("plane coefficients") {
  CHECK(plane_coeff(0, 6, Signedness::TwosComplement) == 1);
  CHECK(plane_coeff(4, 6, Signedness::TwosComplement) == 16);
  CHECK(plane_coeff(5, 6, Signedness::TwosComplement) == -32);
  CHECK(plane_coeff(7, 8, Signedness::TwosComplement) == -128);
  CHECK(plane_coeff(5, 6, Signedness::Unsigned) == 32);
  try {
    plane_coeff(6, 6, Signedness::TwosComplement);
    FAIL("expected an index error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Index);
  }
  CHECK_THROWS_AS(plane_coeff(-1, 6, Signedness::Unsigned), Error);
}

TEST_CASE("two's-complement planes of small values") {
  const int32_t values[] = {-1, 5, -32, 31};
  const BitPlaneSet bp = decompose(values, 1, 4, 6, Signedness::TwosComplement);
  for (int s = 0; s < 6; ++s) CHECK(bp.bit(s, 0, 0) == 1);  // -1 = 111111
  CHECK(bp.bit(0, 0, 1) == 1);
  CHECK(bp.bit(1, 0, 1) == 0);
  CHECK(bp.bit(2, 0, 1) == 1);
  CHECK(bp.bit(5, 0, 2) == 1);
  for (int s = 0; s < 5; ++s) CHECK(bp.bit(s, 0, 2) == 0);
  CHECK(bp.bit(5, 0, 3) == 0);
  CHECK(recompose(bp) == std::vector<int32_t>(std::begin(values), std::end(values)));
}

TEST_CASE("decompose rejects unrepresentable values") {
  const int32_t neg[] = {-1};
  CHECK_THROWS_AS(decompose(neg, 1, 1, 4, Signedness::Unsigned), Error);
  const int32_t big[] = {32};
  CHECK_THROWS_AS(decompose(big, 1, 1, 6, Signedness::TwosComplement), Error);
  const int32_t two[] = {1, 2};
  CHECK_THROWS_AS(decompose(two, 1, 3, 6, Signedness::TwosComplement), Error);
}

TEST_CASE("packed shape follows the chunk layout") {
  std::mt19937_64 rng(1);
  // Weights [16, 256] at 6 bits: [K/128, N/8, 6, 8, 128/64] = [2, 2, 6, 8, 2].
  const QuantTensor w = testing::random_quant(rng, 16, 256, 6);
  const PackedTensor pw = pack(w, PackConfig::for_weights());
  CHECK(pw.k_chunks() == 2);
  CHECK(pw.row_chunks() == 2);
  CHECK(pw.words.size() == 2u * 2 * 6 * 8 * 2);

  // GEMV activations [1, 256]: chunk_m = 1, shape [2, 1, q, 1, 2].
  const QuantTensor x = testing::random_quant(rng, 1, 256, 8);
  const PackConfig xc = PackConfig::for_activations(1);
  CHECK(xc.chunk_m == 1);
  const PackedTensor px = pack(x, xc);
  CHECK(px.words.size() == 2u * 1 * 8 * 1 * 2);
  CHECK(PackConfig::for_activations(5).chunk_m == 5);
  CHECK(PackConfig::for_activations(64).chunk_m == 8);

  // 32-bit words double the word count per chunk row.
  CHECK(pack(x, PackConfig::for_activations(1, 32)).words.size() == 2u * 8 * 4);
}

TEST_CASE("bits land LSB-first inside words") {
  QuantTensor q;
  q.rows = 1;
  q.cols = 130;
  q.bits = 2;
  q.group_size = 128;
  q.values.assign(130, 0);
  q.values[0] = 1;    // plane 0
  q.values[65] = -1;  // planes 0 and 1 (binary 11)
  q.values[129] = 1;
  q.scales.assign(2, 1.0f);
  const PackedTensor p = pack(q, PackConfig::for_activations(1));
  CHECK(p.chunk_row(0, 0, 0, 0)[0] == 1u);
  CHECK(p.chunk_row(0, 0, 0, 0)[1] == 2u);
  CHECK(p.chunk_row(0, 0, 1, 0)[1] == 2u);
  CHECK(p.chunk_row(1, 0, 0, 0)[0] == 2u);
  CHECK(p.chunk_row(1, 0, 0, 0)[1] == 0u);  // zero padding
  CHECK(p.padded_cols == 256);

  const PackedTensor p32 = pack(q, PackConfig::for_activations(1, 32));
  CHECK(p32.chunk_row(0, 0, 0, 0)[2] == 2u);  // bit 65 is bit 1 of the third 32-bit word
}

TEST_CASE("pack and unpack are inverse for every width and role") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> rows(1, 19), cols(1, 333);
  for (int i = 0; i < 40; ++i) {
    const int bits = kMinBits + i % (kMaxBits - kMinBits + 1);
    const QuantTensor q = testing::random_quant(rng, rows(rng), cols(rng), bits);
    const BitPlaneSet bp = decompose(q);
    for (int wb : {32, 64}) {
      for (const PackConfig& cfg : {PackConfig::for_activations(q.rows, wb), PackConfig::for_weights(wb)}) {
        const PackedTensor p = pack(bp, cfg);
        CHECK(p.padded_rows % cfg.chunk_m == 0);
        CHECK(p.padded_cols % cfg.chunk_k == 0);
        if (wb == 32) {
          for (uint64_t w : p.words) CHECK((w >> 32) == 0);
        }
        CHECK(unpack(p, cfg) == bp);
      }
    }
  }
}

TEST_CASE("unpack rejects a mismatched config") {
  std::mt19937_64 rng(2);
  const PackedTensor p = pack(testing::random_quant(rng, 3, 100, 6), PackConfig::for_activations(3));
  CHECK_THROWS_AS(unpack(p, PackConfig::for_weights()), Error);
  PackedTensor truncated = p;
  truncated.words.pop_back();
  CHECK_THROWS_AS(unpack(truncated, p.config), Error);
}

TEST_CASE("pack config validation") {
  PackConfig c;
  c.word_bits = 16;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PackConfig{};
  c.chunk_k = 96;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PackConfig{};
  c.chunk_m = 9;
  CHECK_THROWS_AS(c.validate(), Error);
}
