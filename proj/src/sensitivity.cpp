#include "flexq/sensitivity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "flexq/bitgemm.hpp"
#include "flexq/error.hpp"

namespace flexq {

void LayerDump::validate() const {
  weight.validate();
  activations.validate();
  if (activations.cols != weight.cols) {
    fail(ErrorKind::Shape, "layer '" + layer_name + "': activation K=" + std::to_string(activations.cols) +
                               " does not match weight K=" + std::to_string(weight.cols));
  }
}

LayerError layer_error(const LayerDump& dump, int w_bits, int a_bits, int group_size) {
  dump.validate();
  const QuantTensor wq = quantize(dump.weight, w_bits, group_size);
  const QuantTensor xq = quantize(dump.activations, a_bits, group_size);
  const GemmOutput yq = quantized_matmul(wq, xq, GemmConfig::for_operands(wq, xq));

  double signal = 0.0;
  double noise = 0.0;
  const std::size_t tokens = dump.activations.rows;
  const std::size_t outputs = dump.weight.rows;
  for (std::size_t m = 0; m < tokens; ++m) {
    for (std::size_t n = 0; n < outputs; ++n) {
      double ref = 0.0;
      for (std::size_t k = 0; k < dump.weight.cols; ++k) {
        ref += static_cast<double>(dump.activations.at(m, k)) * static_cast<double>(dump.weight.at(n, k));
      }
      const double diff = ref - static_cast<double>(yq.data.at(m, n));
      signal += ref * ref;
      noise += diff * diff;
    }
  }
  LayerError err;
  const double cells = static_cast<double>(tokens * outputs);
  err.output_mse = cells > 0 ? noise / cells : 0.0;
  if (signal == 0.0) {
    err.sqnr_db = kSqnrSentinel;
  } else if (noise == 0.0) {
    err.sqnr_db = kSqnrSentinel;
  } else {
    err.sqnr_db = 10.0 * std::log10(signal / noise);
  }
  return err;
}

double outlier_score(const FloatTensor& activations) {
  if (activations.cols == 0) return 1.0;
  std::vector<double> channel_max(activations.cols, 0.0);
  for (std::size_t r = 0; r < activations.rows; ++r) {
    for (std::size_t c = 0; c < activations.cols; ++c) {
      channel_max[c] = std::max(channel_max[c], static_cast<double>(std::fabs(activations.at(r, c))));
    }
  }
  const double peak = *std::max_element(channel_max.begin(), channel_max.end());
  std::vector<double> sorted = channel_max;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  if (median == 0.0) return peak == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return peak / median;
}

SensitivityReport rank_layers(const std::vector<LayerDump>& dumps, int w_bits, int a_bits, int group_size,
                              int workers) {
  if (dumps.empty()) fail(ErrorKind::InvalidInput, "sensitivity analysis needs at least one layer");
  SensitivityReport report;
  report.weight_bits = w_bits;
  report.activation_bits = a_bits;
  report.group_size = group_size;
  report.layers.resize(dumps.size());

  auto evaluate = [&](std::size_t i) {
    const LayerError err = layer_error(dumps[i], w_bits, a_bits, group_size);
    report.layers[i] = {dumps[i].layer_name, dumps[i].layer_kind, err.sqnr_db, err.output_mse,
                        outlier_score(dumps[i].activations)};
  };
  const auto n_workers = static_cast<std::size_t>(std::clamp<int>(workers, 1, static_cast<int>(dumps.size())));
  if (n_workers == 1) {
    for (std::size_t i = 0; i < dumps.size(); ++i) evaluate(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n_workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < n_workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = next++; i < dumps.size(); i = next++) evaluate(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  report.ranking.resize(dumps.size());
  std::iota(report.ranking.begin(), report.ranking.end(), std::size_t{0});
  std::sort(report.ranking.begin(), report.ranking.end(), [&](std::size_t a, std::size_t b) {
    const auto& la = report.layers[a];
    const auto& lb = report.layers[b];
    if (la.sqnr_db != lb.sqnr_db) return la.sqnr_db < lb.sqnr_db;
    return la.layer_name < lb.layer_name;
  });
  return report;
}

BitPolicy assign_policy(const SensitivityReport& report, int high_bits, std::size_t budget_k) {
  if (budget_k > report.layers.size()) {
    fail(ErrorKind::InvalidInput, "budget " + std::to_string(budget_k) + " exceeds the " +
                                      std::to_string(report.layers.size()) + " analysed layers");
  }
  BitPolicy policy = BitPolicy::uniform(6);
  for (std::size_t i = 0; i < budget_k; ++i) {
    policy.activation_bits_by_layer[report.layers[report.ranking[i]].layer_kind] = high_bits;
  }
  policy.validate();
  return policy;
}

namespace {

FloatTensor gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double stddev) {
  std::normal_distribution<float> dist(0.0f, static_cast<float>(stddev));
  FloatTensor t(rows, cols);
  for (float& v : t.data) v = dist(rng);
  return t;
}

}  // namespace

std::vector<LayerDump> make_glu_fixture(uint64_t seed, const GluFixtureOptions& options) {
  std::mt19937_64 rng(seed);
  const std::size_t h = options.hidden;
  const std::size_t inter = options.intermediate;
  const std::size_t tokens = options.tokens;
  const double w_std_h = 1.0 / std::sqrt(static_cast<double>(h));
  const double w_std_i = 1.0 / std::sqrt(static_cast<double>(inter));

  std::vector<LayerDump> dumps;
  dumps.push_back({"layer0.qkv_proj", LayerKind::QkvProj, gaussian(rng, 3 * 32, h, w_std_h), gaussian(rng, tokens, h, 1.0)});
  dumps.push_back({"layer0.o_proj", LayerKind::OProj, gaussian(rng, 32, h, w_std_h), gaussian(rng, tokens, h, 1.0)});
  dumps.push_back({"layer0.gate_proj", LayerKind::GateProj, gaussian(rng, 64, h, w_std_h), gaussian(rng, tokens, h, 1.0)});
  dumps.push_back({"layer0.up_proj", LayerKind::UpProj, gaussian(rng, 64, h, w_std_h), gaussian(rng, tokens, h, 1.0)});

  // down_proj input: heavy-tailed (Student-t, 3 dof) with one dominant channel.
  FloatTensor down_weight = gaussian(rng, 32, inter, w_std_i);
  std::student_t_distribution<float> heavy(3.0f);
  FloatTensor acts(tokens, inter);
  for (float& v : acts.data) v = heavy(rng);
  if (options.with_outlier) {
    std::uniform_int_distribution<std::size_t> pick(0, inter - 1);
    const std::size_t channel = pick(rng);
    for (std::size_t t = 0; t < tokens; ++t) acts.at(t, channel) *= static_cast<float>(options.outlier_factor);
  }
  dumps.push_back({"layer0.down_proj", LayerKind::DownProj, std::move(down_weight), std::move(acts)});
  return dumps;
}

}  // namespace flexq
