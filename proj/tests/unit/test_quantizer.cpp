#include <cmath>
#include <random>

#include "doctest.h"
#include "flexq/error.hpp"
#include "flexq/quantizer.hpp"
#include "helpers.hpp"

using namespace flexq;

TEST_CASE("scale is max-abs over the symmetric range") {
  const float group[] = {0.25f, -1.0f, 0.5f, 0.0f};
  CHECK(compute_group_scale(group, 6) == 1.0f / 31.0f);
  CHECK(compute_group_scale(group, 8) == 1.0f / 127.0f);
  const float zeros[] = {0.0f, -0.0f, 0.0f};
  CHECK(compute_group_scale(zeros, 6) == 1.0f);
}

TEST_CASE("extremes map to +-qmax") {
  FloatTensor t(1, 4, {1.0f, -1.0f, 0.0f, 0.25f});
  const QuantTensor q = quantize(t, 6);
  REQUIRE(q.scales.size() == 1);
  CHECK(q.values[0] == 31);
  CHECK(q.values[1] == -31);
  CHECK(q.values[2] == 0);
  CHECK(q.values[3] == 8);  // 0.25 * 31 = 7.75
}

TEST_CASE("ties round away from zero") {
  // scale = 1 exactly, so x / scale is exact.
  FloatTensor t(1, 4, {31.0f, 2.5f, -2.5f, -0.5f});
  const QuantTensor q = quantize(t, 6);
  CHECK(q.scales[0] == 1.0f);
  CHECK(q.values[1] == 3);
  CHECK(q.values[2] == -3);
  CHECK(q.values[3] == -1);
}

TEST_CASE("all-zero group gets scale 1 and zero codes") {
  const QuantTensor q = quantize(FloatTensor(2, 128), 8);
  for (float s : q.scales) CHECK(s == 1.0f);
  for (int8_t v : q.values) CHECK(v == 0);
}

TEST_CASE("partial final group has its own scale") {
  FloatTensor t(1, 130);
  t.data[0] = 3.1f;
  t.data[128] = 7.75f;
  t.data[129] = -3.875f;
  const QuantTensor q = quantize(t, 6);
  REQUIRE(q.groups_per_row() == 2);
  CHECK(q.scales[0] == doctest::Approx(0.1f));
  CHECK(q.scales[1] == 0.25f);
  CHECK(q.values[128] == 31);
  CHECK(q.values[129] == -16);  // -15.5 rounds away from zero
  CHECK(q.value(0, 0) == 31);
}

TEST_CASE("round trip stays within half a step") {
  std::mt19937_64 rng(11);
  for (int bits = kMinBits; bits <= kMaxBits; ++bits) {
    const FloatTensor t = testing::random_tensor(rng, 5, 300, 3.0f);
    const QuantTensor q = quantize(t, bits);
    q.validate();
    const FloatTensor back = dequantize(q);
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (std::size_t c = 0; c < t.cols; ++c) {
        const double s = q.scale(r, c);
        CHECK(std::fabs(double(t.at(r, c)) - double(back.at(r, c))) <= s / 2 + 1e-6 * s);
      }
    }
  }
}

TEST_CASE("binary16 rounding") {
  CHECK(round_to_half(1.0f) == 1.0f);
  CHECK(round_to_half(1.0f + std::ldexp(1.0f, -11)) == 1.0f);                           // tie to even
  CHECK(round_to_half(1.0f + 3 * std::ldexp(1.0f, -11)) == 1.0f + std::ldexp(1.0f, -9));  // tie to even
  CHECK(round_to_half(-0.1f) == -0.0999755859375f);
  CHECK(round_to_half(1e6f) == 65504.0f);
  CHECK(round_to_half(std::ldexp(1.0f, -24)) == std::ldexp(1.0f, -24));
  CHECK(round_to_half(std::ldexp(1.0f, -26)) == 0.0f);
}

TEST_CASE("fp16 scale storage stores representable scales") {
  std::mt19937_64 rng(3);
  const FloatTensor t = testing::random_tensor(rng, 3, 256);
  const QuantTensor q = quantize(t, 6, 128, {ScaleStorage::Float16});
  const QuantTensor ref = quantize(t, 6);
  for (std::size_t i = 0; i < q.scales.size(); ++i) CHECK(q.scales[i] == round_to_half(ref.scales[i]));
  q.validate();
}

TEST_CASE("invalid arguments") {
  FloatTensor t(1, 8);
  CHECK_THROWS_AS(quantize(t, 1), Error);
  CHECK_THROWS_AS(quantize(t, 9), Error);
  CHECK_THROWS_AS(quantize(t, 6, 0), Error);
  t.data[3] = NAN;
  CHECK_THROWS_AS(quantize(t, 6), Error);
  QuantTensor bad = quantize(FloatTensor(1, 4), 6);
  bad.values[0] = 32;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("layer policies") {
  const BitPolicy flexq = BitPolicy::flexq_default();
  CHECK(flexq.weight_bits == 6);
  CHECK(activation_bits(LayerKind::DownProj, flexq) == 8);
  for (LayerKind k : {LayerKind::QkvProj, LayerKind::OProj, LayerKind::GateProj, LayerKind::UpProj}) {
    CHECK(activation_bits(k, flexq) == 6);
  }
  CHECK(policy_for(Architecture::Glu) == flexq);
  CHECK(activation_bits(LayerKind::DownProj, policy_for(Architecture::NonGlu)) == 6);

  BitPolicy partial;
  partial.activation_bits_by_layer[LayerKind::QkvProj] = 6;
  try {
    activation_bits(LayerKind::DownProj, partial);
    FAIL("expected a policy miss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PolicyMiss);
  }
  CHECK(parse_layer_kind("up_proj") == LayerKind::UpProj);
  CHECK_THROWS_AS(parse_layer_kind("lm_head"), Error);
}
