#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "CLI11.hpp"

#include "flexq/cli.hpp"
#include "flexq/error.hpp"
#include "flexq/format.hpp"

namespace flexq::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Relative output paths land under $FLEXQ_OUTPUT_DIR when it is set.
fs::path output_path(const std::string& p) {
  const fs::path path(p);
  if (const char* dir = std::getenv("FLEXQ_OUTPUT_DIR"); dir && *dir && path.is_relative()) {
    fs::create_directories(dir);
    return fs::path(dir) / path;
  }
  return path;
}

std::span<const uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

void write_text(const fs::path& path, const std::string& text) { flxq::write_file_atomic(path, as_bytes(text)); }

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  json config = json::object();

  std::vector<uint8_t> read_input(const std::string& path) {
    std::vector<uint8_t> bytes = flxq::read_file(path);
    inputs_.push_back({{"path", path}, {"fnv1a64", hex64(flxq::fnv1a64(bytes))}});
    return bytes;
  }
  void add_output(const fs::path& p) { outputs_.push_back(p.string()); }
  void add_timing(const std::string& key, uint64_t ns) { timing_[key] = ns; }

  // One manifest per run, next to the primary output.
  void write(const fs::path& primary) {
    timing_["total_ns"] = static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_).count());
    const json j = {{"command", command_}, {"config", config},   {"inputs", inputs_},
                    {"outputs", outputs_}, {"timing", timing_}, {"tool_version", kToolVersion}};
    fs::path path = primary;
    path += ".manifest.json";
    write_text(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json timing_ = json::object();
};

BitPolicy named_policy(const std::string& name) {
  if (name == "flexq" || name == "default" || name == "glu") return policy_for(Architecture::Glu);
  if (name == "uniform6" || name == "non-glu") return policy_for(Architecture::NonGlu);
  if (name == "uniform8") return BitPolicy::uniform(8);
  fail(ErrorKind::InvalidInput, "unknown policy '" + name + "' (expected flexq, uniform6, uniform8 or non-glu)");
}

uint64_t elapsed_ns(std::chrono::steady_clock::time_point t0) {
  return static_cast<uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count());
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bit-serial W6Ax quantized GEMM engine and analysis toolkit", "flexq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // gen
  std::size_t gen_rows = 0, gen_cols = 0;
  uint64_t gen_seed = 0;
  std::string gen_dist = "normal", gen_out;
  auto* gen = app.add_subcommand("gen", "Write a random float tensor (FLXQ kind 0)");
  gen->add_option("--rows", gen_rows, "Rows")->required();
  gen->add_option("--cols", gen_cols, "Columns")->required();
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--dist", gen_dist, "normal | student-t")->check(CLI::IsMember({"normal", "student-t"}));
  gen->add_option("--out", gen_out, "Output file")->required();

  // quantize
  std::string q_in, q_out, q_kind, q_policy = "flexq", q_role = "activation";
  int q_bits = 6, q_group = kDefaultGroupSize;
  bool q_fp16 = false;
  auto* quant = app.add_subcommand("quantize", "Group-quantize a float tensor");
  quant->add_option("input", q_in, "Float tensor file")->required();
  auto* q_bits_opt = quant->add_option("--bits", q_bits, "Bit-width (2..8)");
  quant->add_option("--group", q_group, "Group size along K");
  quant->add_option("--layer-kind", q_kind, "Resolve the bit-width from the policy for this layer kind");
  quant->add_option("--policy", q_policy, "flexq | uniform6 | uniform8 | non-glu");
  quant->add_option("--role", q_role, "activation | weight")->check(CLI::IsMember({"activation", "weight"}));
  quant->add_flag("--fp16-scales", q_fp16, "Round scales to binary16");
  quant->add_option("--out", q_out, "Output file")->required();

  // pack
  std::string p_in, p_out, p_role = "activation";
  int p_word_bits = 64;
  auto* packc = app.add_subcommand("pack", "Bit-plane pack a quantized tensor (FLXQ kind 2)");
  packc->add_option("input", p_in, "Quant tensor file")->required();
  packc->add_option("--role", p_role, "activation | weight")->check(CLI::IsMember({"activation", "weight"}));
  packc->add_option("--word-bits", p_word_bits, "32 | 64")->check(CLI::IsMember({32, 64}));
  packc->add_option("--out", p_out, "Output file")->required();

  // gemm
  std::string g_w, g_x, g_out;
  GemmConfig g_cfg;
  bool g_oracle = false, g_check = false;
  auto* gemmc = app.add_subcommand("gemm", "Run the bit-serial GEMM Y = X * W^T on quantized operands");
  gemmc->add_option("--weights", g_w, "Quant tensor [N, K]")->required();
  gemmc->add_option("--acts", g_x, "Quant tensor [M, K]")->required();
  gemmc->add_option("--stages", g_cfg.pipeline_stages, "Pipeline stages")->check(CLI::PositiveNumber);
  gemmc->add_option("--workers", g_cfg.worker_count, "Worker threads")->check(CLI::PositiveNumber);
  gemmc->add_option("--tile-m", g_cfg.tile_m, "Output tile rows (0 = auto)");
  gemmc->add_option("--tile-n", g_cfg.tile_n, "Output tile columns");
  gemmc->add_option("--tile-k", g_cfg.tile_k, "K tile");
  gemmc->add_flag("--oracle", g_oracle, "Use the direct integer reference instead of the bit-serial engine");
  gemmc->add_flag("--check", g_check, "Also run the reference and fail unless outputs are bit-identical");
  gemmc->add_option("--out", g_out, "Output float tensor")->required();

  // layout
  std::string l_spec, l_out;
  bool l_golden = false;
  auto* layout = app.add_subcommand("layout", "Simulate memory transactions for a data layout");
  auto* l_spec_opt = layout->add_option("--spec", l_spec, "Layout spec JSON file");
  auto* l_golden_opt = layout->add_flag("--golden", l_golden, "Check the reference utilization figures");
  l_spec_opt->excludes(l_golden_opt);
  layout->add_option("--out", l_out, "Also write the report to this file");

  // bench
  std::string b_suite = "llama-shapes", b_out;
  bool b_json = false;
  BenchOptions b_opts;
  auto* bench = app.add_subcommand("bench", "Benchmark the GEMM engine");
  bench->add_option("--suite", b_suite, "llama-shapes | sweep | gemv-4096");
  bench->add_flag("--json", b_json, "Print the JSON report");
  bench->add_option("--stages", b_opts.stages)->check(CLI::PositiveNumber);
  bench->add_option("--workers", b_opts.workers)->check(CLI::PositiveNumber);
  bench->add_option("--repeats", b_opts.repeats)->check(CLI::PositiveNumber);
  bench->add_option("--seed", b_opts.seed);
  bench->add_option("--out", b_out, "Write the JSON report to this file");

  // sensitivity
  std::string s_manifest, s_out;
  int s_wbits = 6, s_abits = 6, s_group = kDefaultGroupSize, s_workers = 1, s_high = 8;
  std::size_t s_budget = 0;
  auto* sens = app.add_subcommand("sensitivity", "Rank layers by quantization sensitivity");
  sens->add_option("--manifest", s_manifest, "Layer manifest JSON")->required();
  sens->add_option("--w-bits", s_wbits);
  sens->add_option("--a-bits", s_abits);
  sens->add_option("--group", s_group);
  sens->add_option("--workers", s_workers)->check(CLI::PositiveNumber);
  auto* s_budget_opt = sens->add_option("--budget", s_budget, "Promote this many layers to --high-bits activations");
  sens->add_option("--high-bits", s_high);
  sens->add_option("--out", s_out, "Report JSON")->required();

  // fixture
  std::string f_dir;
  uint64_t f_seed = 0;
  bool f_no_outlier = false;
  auto* fixture = app.add_subcommand("fixture", "Write the synthetic GLU layer-dump fixture");
  fixture->add_option("--out-dir", f_dir)->required();
  fixture->add_option("--seed", f_seed);
  fixture->add_flag("--no-outlier", f_no_outlier);

  // verify
  bool v_full = false;
  uint64_t v_seed = 1;
  std::vector<std::string> v_fixtures;
  auto* verify = app.add_subcommand("verify", "Run the built-in verification suites");
  verify->add_flag("--full", v_full, "Add the exhaustive (p, q) sweep");
  verify->add_option("--seed", v_seed);
  verify->add_option("--fixture", v_fixtures, "FLXQ files that must decode cleanly");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      std::mt19937_64 rng(gen_seed);
      FloatTensor t(gen_rows, gen_cols);
      if (gen_dist == "normal") {
        std::normal_distribution<float> d(0.0f, 1.0f);
        for (float& v : t.data) v = d(rng);
      } else {
        std::student_t_distribution<float> d(3.0f);
        for (float& v : t.data) v = d(rng);
      }
      Manifest m("gen");
      m.config = {{"rows", gen_rows}, {"cols", gen_cols}, {"seed", gen_seed}, {"dist", gen_dist}};
      const fs::path o = output_path(gen_out);
      flxq::save(o, t);
      m.add_output(o);
      m.write(o);
      out << o.string() << "\n";
    } else if (*quant) {
      Manifest m("quantize");
      const FloatTensor t = flxq::decode_float(m.read_input(q_in));
      const BitPolicy policy = named_policy(q_policy);
      int bits = q_bits;
      if (!q_kind.empty()) {
        const LayerKind kind = parse_layer_kind(q_kind);
        const int resolved = q_role == "weight" ? policy.weight_bits : activation_bits(kind, policy);
        if (q_bits_opt->count() > 0 && q_bits != resolved) {
          fail(ErrorKind::InvalidInput, "--bits " + std::to_string(q_bits) + " conflicts with policy '" + q_policy +
                                            "', which assigns " + std::to_string(resolved) + " bits to " + q_kind);
        }
        bits = resolved;
      }
      const auto t0 = std::chrono::steady_clock::now();
      const QuantTensor q = quantize(t, bits, q_group,
                                     {q_fp16 ? ScaleStorage::Float16 : ScaleStorage::Float32});
      m.add_timing("quantize_ns", elapsed_ns(t0));
      double worst = 0.0;  // max |x - dq(q(x))| / scale
      for (std::size_t r = 0; r < t.rows; ++r) {
        for (std::size_t c = 0; c < t.cols; ++c) {
          const double s = q.scale(r, c);
          worst = std::max(worst, std::fabs(double(t.at(r, c)) - double(q.value(r, c)) * s) / s);
        }
      }
      m.config = {{"bits", bits},          {"group_size", q_group}, {"layer_kind", q_kind},
                  {"policy", q_policy},    {"role", q_role},        {"fp16_scales", q_fp16}};
      const fs::path o = output_path(q_out);
      flxq::save(o, q);
      m.add_output(o);
      m.write(o);
      out << json{{"output", o.string()},
                  {"bits", bits},
                  {"group_size", q_group},
                  {"shape", {q.rows, q.cols}},
                  {"max_error_over_scale", worst}}
                 .dump()
          << "\n";
    } else if (*packc) {
      Manifest m("pack");
      const QuantTensor q = flxq::decode_quant(m.read_input(p_in));
      const PackConfig cfg = p_role == "weight" ? PackConfig::for_weights(p_word_bits)
                                                : PackConfig::for_activations(q.rows, p_word_bits);
      const PackedTensor p = pack(q, cfg);
      m.config = {{"role", p_role}, {"word_bits", p_word_bits}, {"chunk_m", cfg.chunk_m}, {"chunk_k", cfg.chunk_k}};
      const fs::path o = output_path(p_out);
      flxq::save(o, p);
      m.add_output(o);
      m.write(o);
      out << json{{"output", o.string()}, {"words", p.words.size()}, {"shape", {p.rows, p.cols}}}.dump() << "\n";
    } else if (*gemmc) {
      Manifest m("gemm");
      const QuantTensor w = flxq::decode_quant(m.read_input(g_w));
      const QuantTensor x = flxq::decode_quant(m.read_input(g_x));
      if (w.cols != x.cols || w.group_size != x.group_size) {
        fail(ErrorKind::Shape, "weights " + g_w + " are [" + std::to_string(w.rows) + "x" + std::to_string(w.cols) +
                                   "] with group " + std::to_string(w.group_size) + " but activations " + g_x +
                                   " are [" + std::to_string(x.rows) + "x" + std::to_string(x.cols) + "] with group " +
                                   std::to_string(x.group_size));
      }
      GemmConfig cfg = GemmConfig::for_operands(w, x);
      cfg.pipeline_stages = g_cfg.pipeline_stages;
      cfg.worker_count = g_cfg.worker_count;
      cfg.tile_m = g_cfg.tile_m;
      cfg.tile_n = g_cfg.tile_n;
      cfg.tile_k = g_cfg.tile_k;
      const auto t0 = std::chrono::steady_clock::now();
      const GemmOutput y = g_oracle ? int_matmul_reference(w, x, cfg) : quantized_matmul(w, x, cfg);
      const uint64_t ns = elapsed_ns(t0);
      m.add_timing("gemm_ns", ns);
      bool identical = true;
      if (g_check) {
        const GemmOutput other = g_oracle ? quantized_matmul(w, x, cfg) : int_matmul_reference(w, x, cfg);
        identical = std::equal(y.data.data.begin(), y.data.data.end(), other.data.data.begin(),
                               [](float a, float b) { return std::bit_cast<uint32_t>(a) == std::bit_cast<uint32_t>(b); });
      }
      m.config = {{"shape", {cfg.m, cfg.n, cfg.k}},
                  {"p", cfg.weight_bits},
                  {"q", cfg.activation_bits},
                  {"group_size", cfg.group_size},
                  {"stages", cfg.pipeline_stages},
                  {"workers", cfg.worker_count},
                  {"tile", {cfg.tile_m, cfg.tile_n, cfg.tile_k}},
                  {"engine", g_oracle ? "reference" : "bit-serial"},
                  {"bmma_passes", y.bmma_passes}};
      const fs::path o = output_path(g_out);
      if (!identical) {
        err << "fused and reference outputs differ\n";
        return kExitVerifyFailed;
      }
      flxq::save(o, y.data);
      m.add_output(o);
      m.write(o);
      const double gops = 2.0 * double(cfg.m) * double(cfg.n) * double(cfg.k) / double(std::max<uint64_t>(ns, 1));
      out << json{{"output", o.string()},
                  {"shape", {cfg.m, cfg.n, cfg.k}},
                  {"p", cfg.weight_bits},
                  {"q", cfg.activation_bits},
                  {"bmma_passes", y.bmma_passes},
                  {"wall_ns", ns},
                  {"effective_GOPS", gops},
                  {"checked", g_check}}
                 .dump()
          << "\n";
    } else if (*layout) {
      json report;
      bool ok = true;
      if (l_golden) {
        json checks = json::array();
        for (const GoldenCheck& c : run_layout_golden()) {
          checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
          ok = ok && c.passed;
        }
        json figures = json::array();
        for (const GoldenFigure& g : golden_figures()) {
          json r = to_json(g.report);
          r["name"] = g.name;
          r["expected_utilization"] = g.expected;
          figures.push_back(std::move(r));
        }
        report = {{"golden", figures}, {"checks", checks}, {"passed", ok}};
      } else if (!l_spec.empty()) {
        std::ifstream in(l_spec);
        if (!in) fail(ErrorKind::InvalidInput, "cannot open layout spec " + l_spec);
        json spec;
        try {
          in >> spec;
        } catch (const json::parse_error& e) {
          throw SpecError("", std::string("invalid JSON: ") + e.what());
        }
        report = evaluate_layout_spec(parse_layout_spec(spec));
      } else {
        err << "layout: one of --spec or --golden is required\n";
        return kExitUsage;
      }
      out << report.dump(2) << "\n";
      if (!l_out.empty()) {
        Manifest m("layout");
        m.config = {{"golden", l_golden}, {"spec", l_spec}};
        const fs::path o = output_path(l_out);
        write_text(o, report.dump(2) + "\n");
        m.add_output(o);
        m.write(o);
      }
      if (!ok) return kExitVerifyFailed;
    } else if (*bench) {
      const json report = run_bench_suite(b_suite, b_opts);
      if (b_json) {
        out << report.dump(2) << "\n";
      } else {
        for (const json& r : report["records"]) {
          out << r["name"].get<std::string>() << " shape=" << r["shape"].dump() << " W" << r["p"] << "A" << r["q"]
              << " tile=" << r["tile"].dump() << " passes=" << r["bmma_passes"] << " wall_ns=" << r["wall_ns"]
              << " GOPS=" << r["effective_GOPS"].get<double>() << "\n";
        }
        if (report.contains("best")) out << "best tile: " << report["best"]["tile"].dump() << "\n";
      }
      if (!b_out.empty()) {
        Manifest m("bench");
        m.config = {{"suite", b_suite}, {"stages", b_opts.stages}, {"workers", b_opts.workers}, {"repeats", b_opts.repeats}};
        const fs::path o = output_path(b_out);
        write_text(o, report.dump(2) + "\n");
        m.add_output(o);
        m.write(o);
      }
    } else if (*sens) {
      Manifest m("sensitivity");
      m.read_input(s_manifest);
      const std::vector<LayerDump> dumps = load_layer_dumps(s_manifest);
      const SensitivityReport r = rank_layers(dumps, s_wbits, s_abits, s_group, s_workers);
      json report = to_json(r);
      if (s_budget_opt->count() > 0) report["policy"] = to_json(assign_policy(r, s_high, s_budget));
      m.config = {{"w_bits", s_wbits}, {"a_bits", s_abits}, {"group_size", s_group}, {"layers", dumps.size()}};
      const fs::path o = output_path(s_out);
      write_text(o, report.dump(2) + "\n");
      m.add_output(o);
      m.write(o);
      out << report.dump(2) << "\n";
    } else if (*fixture) {
      GluFixtureOptions opts;
      opts.with_outlier = !f_no_outlier;
      const fs::path dir = output_path(f_dir);
      write_layer_dumps(dir.string(), make_glu_fixture(f_seed, opts));
      Manifest m("fixture");
      m.config = {{"seed", f_seed}, {"outlier", opts.with_outlier}};
      m.add_output(dir / "manifest.json");
      m.write(dir / "fixture");
      out << (dir / "manifest.json").string() << "\n";
    } else if (*verify) {
      for (const std::string& f : v_fixtures) {
        flxq::decode(flxq::read_file(f));
        out << "PASS fixture " << f << "\n";
      }
      bool ok = true;
      for (const SuiteResult& s : run_verify_suites(v_full, v_seed)) {
        out << (s.passed ? "PASS " : "FAIL ") << s.name << ": " << s.detail << "\n";
        ok = ok && s.passed;
      }
      if (!ok) return kExitVerifyFailed;
    }
  } catch (const FormatError& e) {
    err << "flexq: " << e.what() << "\n";
    return kExitFormat;
  } catch (const SpecError& e) {
    err << "flexq: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "flexq: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "flexq: " << e.what() << "\n";
    return kExitVerifyFailed;
  }
  return kExitOk;
}

}  // namespace flexq::cli
