#include <algorithm>
#include <chrono>
#include <random>
#include <tuple>

#include "flexq/cli.hpp"
#include "flexq/error.hpp"

namespace flexq::cli {

using nlohmann::json;

json to_json(const BenchRecord& r) {
  return {{"name", r.name},
          {"shape", {r.m, r.n, r.k}},
          {"p", r.p},
          {"q", r.q},
          {"group_size", r.group_size},
          {"stages", r.stages},
          {"workers", r.workers},
          {"tile", {r.tile_m, r.tile_n, r.tile_k}},
          {"wall_ns", r.wall_ns},
          {"bmma_passes", r.bmma_passes},
          {"effective_GOPS", r.effective_gops}};
}

std::size_t select_best(const std::vector<BenchRecord>& records) {
  if (records.empty()) fail(ErrorKind::InvalidInput, "no sweep records to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const BenchRecord& a = records[i];
    const BenchRecord& b = records[best];
    if (a.effective_gops > b.effective_gops ||
        (a.effective_gops == b.effective_gops &&
         std::tie(a.tile_m, a.tile_n, a.tile_k) < std::tie(b.tile_m, b.tile_n, b.tile_k))) {
      best = i;
    }
  }
  return best;
}

namespace {

FloatTensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<float> dist(0.0f, 1.0f);
  FloatTensor t(rows, cols);
  for (float& v : t.data) v = dist(rng);
  return t;
}

}  // namespace

BenchRecord bench_one(const std::string& name, std::size_t m, std::size_t n, std::size_t k, int p, int q,
                      const GemmConfig& base, const BenchOptions& options) {
  std::mt19937_64 rng(options.seed ^ (m * 1000003u + n * 7919u + k));
  const QuantTensor w = quantize(random_tensor(rng, n, k), p, base.group_size);
  const QuantTensor x = quantize(random_tensor(rng, m, k), q, base.group_size);
  const PackedTensor wp = pack(w, PackConfig::for_weights());
  const PackedTensor xp = pack(x, PackConfig::for_activations(m));

  GemmConfig cfg = base;
  cfg.m = m;
  cfg.n = n;
  cfg.k = k;
  cfg.weight_bits = p;
  cfg.activation_bits = q;

  BenchRecord rec;
  rec.name = name;
  rec.m = m;
  rec.n = n;
  rec.k = k;
  rec.p = p;
  rec.q = q;
  rec.group_size = cfg.group_size;
  rec.stages = cfg.pipeline_stages;
  rec.workers = cfg.worker_count;
  rec.tile_m = cfg.tile_m;
  rec.tile_n = cfg.tile_n;
  rec.tile_k = cfg.tile_k;
  rec.wall_ns = UINT64_MAX;
  for (int i = 0; i < std::max(1, options.repeats); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const GemmOutput out = execute_tiled(wp, xp, w.scales, x.scales, cfg);
    const auto t1 = std::chrono::steady_clock::now();
    rec.bmma_passes = out.bmma_passes;
    rec.wall_ns = std::min<uint64_t>(rec.wall_ns, static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
  }
  rec.wall_ns = std::max<uint64_t>(rec.wall_ns, 1);
  rec.effective_gops = 2.0 * static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(k) /
                       static_cast<double>(rec.wall_ns);
  return rec;
}

json run_bench_suite(const std::string& suite, const BenchOptions& options) {
  GemmConfig base;
  base.pipeline_stages = options.stages;
  base.worker_count = options.workers;
  json records = json::array();
  json out = {{"suite", suite}, {"tool_version", kToolVersion}};

  if (suite == "llama-shapes") {
    // LLaMA-7B projections with hidden 4096 -> 512 and intermediate 11008 -> 1376, plus the
    // LLaMA-70B down_proj class (28672 -> 8192) scaled by 1/16. down_proj runs W6A8.
    struct Shape {
      const char* name;
      std::size_t n, k;
      int q;
    };
    const Shape shapes[] = {{"qkv_proj", 1536, 512, 6},   {"o_proj", 512, 512, 6},
                            {"gate_proj", 1376, 512, 6},  {"up_proj", 1376, 512, 6},
                            {"down_proj", 512, 1376, 8},  {"down_proj_70b_class", 512, 1792, 8}};
    for (std::size_t m : {1, 4, 8}) {
      for (const Shape& s : shapes) records.push_back(to_json(bench_one(s.name, m, s.n, s.k, 6, s.q, base, options)));
    }
    records.push_back(to_json(bench_one("gemv_4096", 1, 4096, 4096, 6, 6, base, options)));
  } else if (suite == "gemv-4096") {
    records.push_back(to_json(bench_one("gemv_4096_w6a6", 1, 4096, 4096, 6, 6, base, options)));
    records.push_back(to_json(bench_one("gemv_4096_w6a8", 1, 4096, 4096, 6, 8, base, options)));
  } else if (suite == "sweep") {
    // Exhaustive tile search on one decode-sized problem.
    std::vector<BenchRecord> sweep;
    for (int tm : {4, 8}) {
      for (int tn : {8, 32, 64, 128}) {
        for (int tk : {128, 512, 1024}) {
          GemmConfig cfg = base;
          cfg.tile_m = tm;
          cfg.tile_n = tn;
          cfg.tile_k = tk;
          sweep.push_back(bench_one("sweep", 4, 1024, 1024, 6, 6, cfg, options));
        }
      }
    }
    for (const BenchRecord& r : sweep) records.push_back(to_json(r));
    out["best"] = to_json(sweep[select_best(sweep)]);
  } else {
    fail(ErrorKind::InvalidInput, "unknown bench suite '" + suite + "' (expected llama-shapes, sweep or gemv-4096)");
  }
  out["records"] = std::move(records);
  return out;
}

}  // namespace flexq::cli
