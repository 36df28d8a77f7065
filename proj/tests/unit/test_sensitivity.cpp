#include <cmath>
#include <random>

#include "doctest.h"
#include "flexq/error.hpp"
#include "flexq/sensitivity.hpp"
#include "helpers.hpp"

using namespace flexq;

namespace {

LayerDump dump(std::mt19937_64& rng, const char* name, LayerKind kind, std::size_t n, std::size_t k) {
  return {name, kind, testing::random_tensor(rng, n, k), testing::random_tensor(rng, 8, k)};
}

}  // namespace

TEST_CASE("outlier score is peak over median channel magnitude") {
  FloatTensor a(2, 4, {1.0f, -2.0f, 3.0f, 0.5f, -1.0f, 1.0f, -100.0f, 0.5f});
  // Channel max-abs: 1, 2, 100, 0.5; median = (1 + 2) / 2.
  CHECK(outlier_score(a) == doctest::Approx(100.0 / 1.5));
  CHECK(outlier_score(FloatTensor(3, 5)) == 1.0);
}

TEST_CASE("exact and all-zero outputs report the sentinel") {
  std::mt19937_64 rng(1);
  LayerDump zero = dump(rng, "zero", LayerKind::Generic, 8, 128);
  zero.weight = FloatTensor(8, 128);
  CHECK(layer_error(zero, 6, 6).sqnr_db == kSqnrSentinel);
  CHECK(layer_error(zero, 6, 6).output_mse == 0.0);

  // Integer-valued operands within range quantize without error when max-abs equals qmax.
  LayerDump exact = dump(rng, "exact", LayerKind::Generic, 8, 128);
  for (float& v : exact.weight.data) v = std::round(v * 8.0f);
  for (float& v : exact.activations.data) v = std::round(v * 8.0f);
  for (std::size_t r = 0; r < 8; ++r) {
    exact.weight.at(r, 0) = 31.0f;
    exact.activations.at(r, 0) = 31.0f;
    for (std::size_t c = 1; c < 128; ++c) {
      exact.weight.at(r, c) = std::clamp(exact.weight.at(r, c), -31.0f, 31.0f);
      exact.activations.at(r, c) = std::clamp(exact.activations.at(r, c), -31.0f, 31.0f);
    }
  }
  CHECK(layer_error(exact, 6, 6).sqnr_db == kSqnrSentinel);
}

TEST_CASE("more activation bits never hurt") {
  std::mt19937_64 rng(5);
  const LayerDump d = dump(rng, "l", LayerKind::UpProj, 32, 384);
  const LayerError a6 = layer_error(d, 6, 6);
  const LayerError a8 = layer_error(d, 6, 8);
  CHECK(a8.sqnr_db > a6.sqnr_db);
  CHECK(a8.output_mse < a6.output_mse);
  CHECK(std::isfinite(a6.sqnr_db));
}

TEST_CASE("ranking orders by ascending SQNR with name tie-break") {
  std::mt19937_64 rng(2);
  std::vector<LayerDump> dumps = {dump(rng, "b", LayerKind::OProj, 8, 128), dump(rng, "a", LayerKind::OProj, 8, 128)};
  dumps[1].weight = dumps[0].weight;
  dumps[1].activations = dumps[0].activations;
  const SensitivityReport r = rank_layers(dumps, 6, 6);
  CHECK(r.layers[0].sqnr_db == r.layers[1].sqnr_db);
  CHECK(r.ranking == std::vector<std::size_t>{1, 0});

  const auto fixture = make_glu_fixture(4);
  const SensitivityReport f = rank_layers(fixture, 6, 6);
  for (std::size_t i = 1; i < f.ranking.size(); ++i) {
    CHECK(f.layers[f.ranking[i - 1]].sqnr_db <= f.layers[f.ranking[i]].sqnr_db);
  }
  CHECK_THROWS_AS(rank_layers({}, 6, 6), Error);
}

TEST_CASE("parallel ranking equals serial ranking") {
  const auto fixture = make_glu_fixture(9);
  const SensitivityReport serial = rank_layers(fixture, 6, 6);
  const SensitivityReport parallel = rank_layers(fixture, 6, 6, 128, 4);
  CHECK(serial.ranking == parallel.ranking);
  for (std::size_t i = 0; i < serial.layers.size(); ++i) CHECK(serial.layers[i].sqnr_db == parallel.layers[i].sqnr_db);
}

TEST_CASE("the GLU fixture singles out down_proj") {
  const auto with = make_glu_fixture(0);
  REQUIRE(with.size() == 5);
  CHECK(with[4].layer_kind == LayerKind::DownProj);
  CHECK(with[4].activations.cols == 512);
  const SensitivityReport r = rank_layers(with, 6, 6);
  CHECK(r.layers[r.ranking.front()].layer_kind == LayerKind::DownProj);
  CHECK(r.layers[4].outlier_score > 20.0);

  GluFixtureOptions opts;
  opts.with_outlier = false;
  const auto without = make_glu_fixture(0, opts);
  CHECK(without[4].weight.data == with[4].weight.data);
  CHECK(outlier_score(with[4].activations) > 10.0 * outlier_score(without[4].activations));
}

TEST_CASE("policy assignment promotes the top layers by kind") {
  const SensitivityReport r = rank_layers(make_glu_fixture(1), 6, 6);
  const BitPolicy none = assign_policy(r, 8, 0);
  CHECK(none == BitPolicy::uniform(6));
  const BitPolicy top = assign_policy(r, 8, 1);
  CHECK(activation_bits(r.layers[r.ranking[0]].layer_kind, top) == 8);
  int promoted = 0;
  for (const auto& [kind, bits] : top.activation_bits_by_layer) promoted += bits == 8;
  CHECK(promoted == 1);
  CHECK_THROWS_AS(assign_policy(r, 8, 6), Error);
}

TEST_CASE("dump validation") {
  std::mt19937_64 rng(3);
  LayerDump d = dump(rng, "bad", LayerKind::Generic, 4, 128);
  d.activations = FloatTensor(2, 64);
  CHECK_THROWS_AS(d.validate(), Error);
}
