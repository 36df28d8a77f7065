// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "flexq/bitgemm.hpp"
#include "flexq/bitpack.hpp"
#include "flexq/layout_sim.hpp"
#include "flexq/quantizer.hpp"
#include "flexq/sensitivity.hpp"

using namespace flexq;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

FloatTensor random_floats(std::mt19937_64& rng, std::size_t rows, std::size_t cols, bool heavy) {
  FloatTensor t(rows, cols);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::student_t_distribution<float> student(3.0f);
  for (float& v : t.data) v = heavy ? student(rng) : normal(rng);
  return t;
}

bool bit_identical(const FloatTensor& a, const FloatTensor& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::equal(a.data.begin(), a.data.end(), b.data.begin(),
                    [](float x, float y) { return std::bit_cast<uint32_t>(x) == std::bit_cast<uint32_t>(y); });
}

GemmOutput fused(const QuantTensor& w, const QuantTensor& x, const GemmConfig& cfg) {
  return group_matmul_fused(pack(w, PackConfig::for_weights()), pack(x, PackConfig::for_activations(x.rows)),
                            w.scales, x.scales, cfg);
}

Outcome oracle_exactness() {
  std::mt19937_64 rng(20240601);
  const std::size_t ms[] = {1, 4, 8, 16};
  std::uniform_int_distribution<std::size_t> ndist(8, 256), kdist(128, 4096);
  int cases = 0, mismatches = 0;
  const auto t0 = std::chrono::steady_clock::now();
  auto run = [&](std::size_t m, std::size_t n, std::size_t k, int p, int q) {
    const QuantTensor w = quantize(random_floats(rng, n, k, false), p);
    const QuantTensor x = quantize(random_floats(rng, m, k, cases % 3 == 0), q);
    const GemmConfig cfg = GemmConfig::for_operands(w, x);
    if (!bit_identical(fused(w, x, cfg).data, int_matmul_reference(w, x, cfg).data)) ++mismatches;
    ++cases;
  };
  for (int p = 2; p <= 8; ++p) {
    for (int q = 2; q <= 8; ++q) run(1 + (p * q) % 8, 5 + p, 128 + 37 * q, p, q);
  }
  while (cases < 1000) run(ms[cases % 4], ndist(rng), kdist(rng), 6, cases % 2 ? 8 : 6);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatches == 0 && secs < 120.0, std::to_string(cases) + " cases, " + std::to_string(mismatches) +
                                                 " mismatches, " + std::to_string(secs) + " s"};
}

// Y^(s,t) from single-bit words through the bmma primitive, then the signed reduction.
int64_t expand_product(int32_t a, int32_t b, int p, int q, Signedness sign) {
  const BitPlaneSet pa = decompose(std::span(&a, 1), 1, 1, p, sign);
  const BitPlaneSet pb = decompose(std::span(&b, 1), 1, 1, q, sign);
  BitProductGrid grid(p, q, 1);
  for (int s = 0; s < p; ++s) {
    for (int t = 0; t < q; ++t) {
      const uint64_t wa = pa.bit(s, 0, 0), wb = pb.bit(t, 0, 0);
      grid.at(s, t, 0) = bmma_chunk(std::span(&wa, 1), std::span(&wb, 1));
    }
  }
  return reduce_bits(grid, p, q, sign).at(0);
}

Outcome bit_expansion() {
  int wrong = 0, checked = 0;
  for (int a = 0; a <= 3; ++a) {
    for (int b = 0; b <= 15; ++b, ++checked) wrong += expand_product(a, b, 2, 4, Signedness::Unsigned) != a * b;
  }
  for (int a = -32; a <= 31; ++a) {
    for (int b = -32; b <= 31; ++b, ++checked) wrong += expand_product(a, b, 6, 6, Signedness::TwosComplement) != a * b;
  }
  return {wrong == 0, std::to_string(checked) + " products, " + std::to_string(wrong) + " wrong"};
}

Outcome bandwidth_golden() {
  const auto is_straddling = [](const LaneAccess& a) { return straddles_word(a); };
  const double fp16 = simulate(naive_layout_pattern(16, 1, 64)).utilization;
  const AccessPattern int6 = naive_layout_pattern(6, 1, 256);
  const double aligned6 = simulate(filter_lanes(int6, [&](const LaneAccess& a) { return !is_straddling(a); })).utilization;
  const double straddle6 = simulate(filter_lanes(int6, is_straddling)).utilization;
  bool ok = fp16 == 1.0 && aligned6 == 0.375 && straddle6 == 0.1875;
  for (const GoldenFigure& g : golden_figures()) ok = ok && g.passed();
  uint64_t conflicts = 0;
  for (int bits : {6, 8}) {
    for (int bm : {1, 2, 8}) {
      for (int bk : {128, 512}) {
        const ChunkedPatterns p = chunked_layout_pattern(PackConfig::for_activations(bm), bits, bm, bk);
        conflicts += simulate(p.global_to_shared).bank_conflicts + simulate(p.shared_to_register).bank_conflicts;
      }
    }
  }
  ok = ok && conflicts == 0;
  char buf[160];
  std::snprintf(buf, sizeof buf, "fp16 %.4f, int6 %.4f, int6 straddling %.4f, chunked conflicts %llu", fp16,
                aligned6, straddle6, static_cast<unsigned long long>(conflicts));
  return {ok, buf};
}

Outcome quantization_bound() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> mag(-6.0f, 6.0f);
  int violations = 0;
  double worst = 0.0;
  for (int g = 0; g < 10000; ++g) {
    const int bits = g % 2 ? 8 : 6;
    FloatTensor t(1, 128);
    const float spread = std::exp2(mag(rng));
    std::normal_distribution<float> dist(0.0f, spread);
    for (float& v : t.data) v = dist(rng);
    const QuantTensor q = quantize(t, bits);
    const float scale = q.scales[0];
    for (std::size_t c = 0; c < 128; ++c) {
      const float x = t.data[c];
      const float dq = static_cast<float>(q.values[c]) * scale;
      const double err = std::fabs(double(x) - double(dq));
      const float mag_x = std::max(std::fabs(x), std::fabs(dq));
      const double ulp = double(std::nextafter(mag_x, INFINITY)) - double(mag_x);
      const double bound = double(scale) / 2.0 + 4.0 * ulp;
      worst = std::max(worst, err / double(scale));
      violations += err > bound;
    }
  }
  return {violations == 0, "10000 groups, worst |err|/scale " + std::to_string(worst) + ", violations " +
                               std::to_string(violations)};
}

Outcome plane_economy() {
  std::mt19937_64 rng(5);
  bool ok = true;
  std::string detail;
  struct Case {
    std::size_t m, n, k;
  };
  for (int q : {6, 8}) {
    for (const Case c : {Case{1, 8, 128}, Case{8, 64, 512}, Case{5, 40, 300}, Case{16, 24, 1024}}) {
      const QuantTensor w = quantize(random_floats(rng, c.n, c.k, false), 6);
      const QuantTensor x = quantize(random_floats(rng, c.m, c.k, false), q);
      const GemmConfig cfg = GemmConfig::for_operands(w, x);
      const uint64_t chunk_m = std::min<std::size_t>(c.m, 8);
      const uint64_t pair_groups = ((c.m + chunk_m - 1) / chunk_m) * ((c.n + 7) / 8) * ((c.k + 127) / 128);
      for (const GemmOutput& out : {fused(w, x, cfg), quantized_matmul(w, x, cfg)}) {
        ok = ok && out.bmma_passes == pair_groups * static_cast<uint64_t>(6 * q);
      }
      if (c.m == 8) {
        const GemmOutput out = fused(w, x, cfg);
        detail += "W6A" + std::to_string(q) + " " + std::to_string(out.bmma_passes / pair_groups) + " passes/pair; ";
      }
    }
  }
  return {ok, detail};
}

Outcome pipeline_determinism() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> mdist(1, 16), ndist(1, 200), kdist(1, 1500);
  int differing = 0;
  for (int i = 0; i < 50; ++i) {
    const QuantTensor w = quantize(random_floats(rng, ndist(rng), kdist(rng), false), 6);
    const QuantTensor x = quantize(random_floats(rng, mdist(rng), w.cols, true), i % 2 ? 8 : 6);
    GemmConfig cfg = GemmConfig::for_operands(w, x);
    cfg.tile_n = 16 << (i % 3);
    cfg.tile_k = 128 << (i % 4);
    const FloatTensor base = fused(w, x, cfg).data;
    for (int workers : {1, 2, 8}) {
      for (int stages : {1, 2, 4}) {
        cfg.worker_count = workers;
        cfg.pipeline_stages = stages;
        differing += !bit_identical(quantized_matmul(w, x, cfg).data, base);
      }
    }
  }
  return {differing == 0, "50 problems x 9 configurations, " + std::to_string(differing) + " differing outputs"};
}

Outcome sensitivity_ranking() {
  int first = 0, monotone = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const std::vector<LayerDump> dumps = make_glu_fixture(seed);
    const SensitivityReport a6 = rank_layers(dumps, 6, 6);
    const SensitivityReport a8 = rank_layers(dumps, 6, 8);
    first += a6.layers[a6.ranking.front()].layer_kind == LayerKind::DownProj;
    bool all = true;
    for (std::size_t i = 0; i < dumps.size(); ++i) all = all && a8.layers[i].sqnr_db >= a6.layers[i].sqnr_db;
    monotone += all;
  }
  return {first >= 95 && monotone == 100, "down_proj first in " + std::to_string(first) +
                                              "/100 seeds; SQNR(a8) >= SQNR(a6) in " + std::to_string(monotone) +
                                              "/100"};
}

Outcome fold_correctness() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int64_t> val(-1000000, 1000000);
  int configs = 0, wrong = 0;
  for (int mma_m : {1, 2, 4, 8}) {
    for (int chunk_m : {1, 2, 4, 8}) {
      if (chunk_m > mma_m) continue;
      ++configs;
      const std::size_t width = 5;
      std::vector<int64_t> lanes(static_cast<std::size_t>(mma_m) * width);
      for (auto& v : lanes) v = val(rng);
      std::vector<int64_t> direct(static_cast<std::size_t>(chunk_m) * width, 0);
      for (int r = 0; r < mma_m; ++r) {
        for (std::size_t c = 0; c < width; ++c) direct[(r % chunk_m) * width + c] += lanes[r * width + c];
      }
      const int rounds = fold_chunk_level(lanes, width, chunk_m, mma_m);
      const int expected_rounds = std::countr_zero(unsigned(mma_m)) - std::countr_zero(unsigned(chunk_m));
      wrong += rounds != expected_rounds || fold_rounds(chunk_m, mma_m) != expected_rounds ||
               !std::equal(direct.begin(), direct.end(), lanes.begin());
    }
  }
  return {wrong == 0, std::to_string(configs) + " (chunk_m, mma_m) pairs, " + std::to_string(wrong) + " wrong"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"1 oracle exactness", oracle_exactness},
      {"2 bit-plane expansion", bit_expansion},
      {"3 bandwidth golden figures", bandwidth_golden},
      {"4 quantization error bound", quantization_bound},
      {"5 bmma pass count", plane_economy},
      {"6 pipeline determinism", pipeline_determinism},
      {"7 sensitivity ranking", sensitivity_ranking},
      {"8 chunk-level fold", fold_correctness},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %s: %s\n", o.passed ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.passed;
  }
  return failed == 0 ? 0 : 1;
}
