#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "flexq/cli.hpp"
#include "flexq/error.hpp"
#include "flexq/format.hpp"

namespace flexq::cli {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- sensitivity I/O -------------------------------------------------------------------------

std::vector<LayerDump> load_layer_dumps(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open layer manifest " + manifest_path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail(ErrorKind::InvalidInput, std::string("layer manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_array()) fail(ErrorKind::InvalidInput, "layer manifest must be a JSON array");
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<LayerDump> dumps;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string at = "/" + std::to_string(i);
    for (const char* key : {"layer_name", "kind", "weight_file", "act_file"}) {
      if (!e.contains(key) || !e[key].is_string()) {
        fail(ErrorKind::InvalidInput, "layer manifest " + at + "/" + key + ": expected a string");
      }
    }
    LayerDump d;
    d.layer_name = e["layer_name"].get<std::string>();
    d.layer_kind = parse_layer_kind(e["kind"].get<std::string>());
    d.weight = flxq::decode_float(flxq::read_file(base / e["weight_file"].get<std::string>()));
    d.activations = flxq::decode_float(flxq::read_file(base / e["act_file"].get<std::string>()));
    d.validate();
    dumps.push_back(std::move(d));
  }
  return dumps;
}

void write_layer_dumps(const std::string& dir, const std::vector<LayerDump>& dumps) {
  fs::create_directories(dir);
  json manifest = json::array();
  for (const LayerDump& d : dumps) {
    const std::string wname = d.layer_name + ".weight.flxq";
    const std::string aname = d.layer_name + ".act.flxq";
    flxq::save(fs::path(dir) / wname, d.weight);
    flxq::save(fs::path(dir) / aname, d.activations);
    manifest.push_back({{"layer_name", d.layer_name},
                        {"kind", std::string(to_string(d.layer_kind))},
                        {"weight_file", wname},
                        {"act_file", aname}});
  }
  const std::string text = manifest.dump(2) + "\n";
  flxq::write_file_atomic(fs::path(dir) / "manifest.json",
                          std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

json to_json(const BitPolicy& policy) {
  json acts = json::object();
  for (const auto& [kind, bits] : policy.activation_bits_by_layer) acts[std::string(to_string(kind))] = bits;
  return {{"weight_bits", policy.weight_bits}, {"activation_bits", acts}};
}

json to_json(const SensitivityReport& report) {
  json layers = json::array();
  for (const LayerSensitivity& l : report.layers) {
    json e = {{"layer_name", l.layer_name},
              {"kind", std::string(to_string(l.layer_kind))},
              {"output_mse", l.output_mse},
              {"outlier_score", std::isfinite(l.outlier_score) ? json(l.outlier_score) : json(nullptr)}};
    // +inf (exact or all-zero output) has no JSON number; it is written as null.
    e["sqnr_db"] = std::isfinite(l.sqnr_db) ? json(l.sqnr_db) : json(nullptr);
    layers.push_back(std::move(e));
  }
  json ranking = json::array();
  for (std::size_t i : report.ranking) ranking.push_back(report.layers[i].layer_name);
  return {{"weight_bits", report.weight_bits},
          {"activation_bits", report.activation_bits},
          {"group_size", report.group_size},
          {"layers", layers},
          {"ranking", ranking}};
}

// ---- verify ------------------------------------------------------------------------------------

namespace {

QuantTensor random_quant(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int bits, int group) {
  QuantTensor q;
  q.rows = rows;
  q.cols = cols;
  q.bits = bits;
  q.group_size = group;
  std::uniform_int_distribution<int> val(-qmax(bits), qmax(bits));
  std::uniform_real_distribution<float> scale(0.001f, 2.0f);
  q.values.resize(rows * cols);
  for (auto& v : q.values) v = static_cast<int8_t>(val(rng));
  q.scales.resize(rows * q.groups_per_row());
  for (auto& s : q.scales) s = scale(rng);
  return q;
}

bool outputs_identical(const GemmOutput& a, const GemmOutput& b) {
  return a.data.data.size() == b.data.data.size() &&
         std::equal(a.data.data.begin(), a.data.data.end(), b.data.data.begin(), [](float x, float y) {
           return std::bit_cast<uint32_t>(x) == std::bit_cast<uint32_t>(y);
         });
}

SuiteResult oracle_suite(std::mt19937_64& rng, bool exhaustive) {
  std::size_t cases = 0;
  auto check = [&](std::size_t m, std::size_t n, std::size_t k, int p, int q) -> bool {
    const QuantTensor w = random_quant(rng, n, k, p, 128);
    const QuantTensor x = random_quant(rng, m, k, q, 128);
    GemmConfig cfg = GemmConfig::for_operands(w, x);
    cfg.trace = true;
    const GemmOutput ref = int_matmul_reference(w, x, cfg);
    const PackedTensor wp = pack(w, PackConfig::for_weights());
    const PackedTensor xp = pack(x, PackConfig::for_activations(m));
    const GemmOutput fused = group_matmul_fused(wp, xp, w.scales, x.scales, cfg);
    GemmConfig piped = cfg;
    piped.pipeline_stages = 3;
    piped.worker_count = 2;
    const GemmOutput tiled = execute_tiled(wp, xp, w.scales, x.scales, piped);
    ++cases;
    return outputs_identical(ref, fused) && ref.group_partials == fused.group_partials &&
           outputs_identical(fused, tiled);
  };
  if (exhaustive) {
    for (int p = 2; p <= 8; ++p) {
      for (int q = 2; q <= 8; ++q) {
        for (std::size_t m : {1, 3, 8}) {
          if (!check(m, 9, 300, p, q)) {
            return {"oracle-sweep", false, "mismatch at p=" + std::to_string(p) + " q=" + std::to_string(q)};
          }
        }
      }
    }
    return {"oracle-sweep", true, std::to_string(cases) + " cases over (p,q) in {2..8}^2"};
  }
  std::uniform_int_distribution<std::size_t> mdist(1, 16), ndist(1, 64), kdist(1, 700);
  for (int i = 0; i < 40; ++i) {
    const int q = i % 2 ? 8 : 6;
    const std::size_t m = mdist(rng), n = ndist(rng), k = kdist(rng);
    if (!check(m, n, k, 6, q)) {
      return {"oracle-equivalence", false,
              "mismatch at M=" + std::to_string(m) + " N=" + std::to_string(n) + " K=" + std::to_string(k)};
    }
  }
  return {"oracle-equivalence", true, std::to_string(cases) + " random W6A6/W6A8 cases bit-identical"};
}

SuiteResult packing_suite(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> rdist(1, 20), cdist(1, 400);
  for (int i = 0; i < 30; ++i) {
    const int bits = 2 + i % 7;
    const QuantTensor q = random_quant(rng, rdist(rng), cdist(rng), bits, 128);
    for (int wb : {32, 64}) {
      for (const PackConfig& cfg : {PackConfig::for_activations(q.rows, wb), PackConfig::for_weights(wb)}) {
        const BitPlaneSet planes = decompose(q);
        const PackedTensor packed = pack(planes, cfg);
        const std::vector<int32_t> back = recompose(unpack(packed, cfg));
        if (!std::equal(back.begin(), back.end(), q.values.begin())) {
          return {"packing-bijection", false, "round trip failed for word width " + std::to_string(wb)};
        }
        const auto reread = flxq::decode_packed(flxq::encode(packed));
        if (!(reread == packed)) return {"packing-bijection", false, "FLXQ-P round trip failed"};
      }
    }
  }
  return {"packing-bijection", true, "30 tensors x 2 word widths x 2 operand roles"};
}

SuiteResult layout_suite() {
  std::size_t failed = 0;
  std::string first;
  const auto checks = run_layout_golden();
  for (const GoldenCheck& c : checks) {
    if (!c.passed) {
      if (first.empty()) first = c.name + ": " + c.detail;
      ++failed;
    }
  }
  if (failed) return {"layout-golden", false, first};
  return {"layout-golden", true, std::to_string(checks.size()) + " checks"};
}

SuiteResult sensitivity_suite() {
  int first = 0;
  constexpr int kSeeds = 10;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const SensitivityReport r = rank_layers(make_glu_fixture(static_cast<uint64_t>(seed)), 6, 6);
    if (r.layers[r.ranking.front()].layer_kind == LayerKind::DownProj) ++first;
  }
  const bool ok = first >= 9;
  return {"sensitivity-fixture", ok, "down_proj ranked first in " + std::to_string(first) + "/" + std::to_string(kSeeds) + " seeds"};
}

}  // namespace

std::vector<SuiteResult> run_verify_suites(bool full, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SuiteResult> out;
  out.push_back(oracle_suite(rng, false));
  out.push_back(packing_suite(rng));
  out.push_back(layout_suite());
  out.push_back(sensitivity_suite());
  if (full) out.push_back(oracle_suite(rng, true));
  return out;
}

}  // namespace flexq::cli
