#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "flexq/bitgemm.hpp"
#include "flexq/layout_sim.hpp"
#include "flexq/sensitivity.hpp"

namespace flexq::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitUsage = 2,
  kExitFormat = 3,
};

// Entry point shared by the binary and the in-process CLI tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// ---- layout specs -------------------------------------------------------------------------

// Malformed layout spec; pointer() is the JSON pointer of the offending field.
class SpecError : public std::runtime_error {
 public:
  SpecError(std::string pointer, const std::string& what)
      : std::runtime_error("layout spec error at " + (pointer.empty() ? std::string("/") : pointer) + ": " + what),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

struct LayoutSpec {
  enum class Kind { Naive, Chunked } kind = Kind::Naive;
  int bits = 6;
  std::size_t rows = 1;  // naive
  std::size_t cols = 256;
  int bm = 8;  // chunked
  int bk = 128;
  PackConfig chunk;
};

LayoutSpec parse_layout_spec(const nlohmann::json& j);
// {"spec": ..., "reports": [{"stage", "transactions", ...}]}
nlohmann::json evaluate_layout_spec(const LayoutSpec& spec);
nlohmann::json to_json(const LayoutReport& report);

struct GoldenCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};
// The utilization triple plus zero-conflict checks over bits {6,8}, BM {1,2,8}, BK {128,512}.
std::vector<GoldenCheck> run_layout_golden();

// ---- bench --------------------------------------------------------------------------------

struct BenchRecord {
  std::string name;
  std::size_t m = 0, n = 0, k = 0;
  int p = 6, q = 6;
  int group_size = kDefaultGroupSize;
  int stages = 1, workers = 1;
  int tile_m = 0, tile_n = 64, tile_k = 512;
  uint64_t wall_ns = 0;
  uint64_t bmma_passes = 0;
  double effective_gops = 0.0;
};

nlohmann::json to_json(const BenchRecord& r);

// Max throughput wins; ties go to the smallest (tile_m, tile_n, tile_k).
std::size_t select_best(const std::vector<BenchRecord>& records);

struct BenchOptions {
  int stages = 2;
  int workers = 1;
  int repeats = 1;
  uint64_t seed = 7;
};

// Suites: "llama-shapes", "sweep", "gemv-4096". Throws SpecError-free usage errors as flexq::Error.
nlohmann::json run_bench_suite(const std::string& suite, const BenchOptions& options);
BenchRecord bench_one(const std::string& name, std::size_t m, std::size_t n, std::size_t k, int p, int q,
                      const GemmConfig& base, const BenchOptions& options);

// ---- verify -------------------------------------------------------------------------------

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SuiteResult> run_verify_suites(bool full, uint64_t seed = 1);

// ---- sensitivity I/O -----------------------------------------------------------------------

// Manifest: [{"layer_name", "kind", "weight_file", "act_file"}], paths relative to the manifest.
std::vector<LayerDump> load_layer_dumps(const std::string& manifest_path);
void write_layer_dumps(const std::string& dir, const std::vector<LayerDump>& dumps);
nlohmann::json to_json(const SensitivityReport& report);
nlohmann::json to_json(const BitPolicy& policy);

}  // namespace flexq::cli
