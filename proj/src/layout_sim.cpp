#include "flexq/layout_sim.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "flexq/error.hpp"

namespace flexq {

void MemModel::validate() const {
  if (bank_count <= 0 || bank_width_bits <= 0 || bank_width_bits % 8 != 0) {
    fail(ErrorKind::Config, "bank geometry must be positive and byte-aligned");
  }
  if (transaction_bytes <= 0 || lane_count <= 0) fail(ErrorKind::Config, "invalid transaction geometry");
}

bool straddles_word(const LaneAccess& access, int word_bytes) {
  const uint64_t wb = static_cast<uint64_t>(word_bytes);
  return access.byte_offset / wb != (access.byte_offset + access.byte_length - 1) / wb;
}

namespace {

uint64_t words_touched(const LaneAccess& a, uint64_t word_bytes) {
  return (a.byte_offset + a.byte_length - 1) / word_bytes - a.byte_offset / word_bytes + 1;
}

void account_phase(const std::vector<const LaneAccess*>& phase, const MemModel& model, LayoutReport& report) {
  const auto wb = static_cast<uint64_t>(model.word_bytes());
  if (model.space == MemSpace::Global) {
    std::set<uint64_t> segments;
    for (const LaneAccess* a : phase) {
      const auto tb = static_cast<uint64_t>(model.transaction_bytes);
      for (uint64_t s = a->byte_offset / tb; s <= (a->byte_offset + a->byte_length - 1) / tb; ++s) segments.insert(s);
    }
    report.transactions += segments.size();
    return;
  }
  std::map<uint64_t, std::set<uint64_t>> rows_by_bank;
  const auto banks = static_cast<uint64_t>(model.bank_count);
  for (const LaneAccess* a : phase) {
    for (uint64_t w = a->byte_offset / wb; w <= (a->byte_offset + a->byte_length - 1) / wb; ++w) {
      rows_by_bank[w % banks].insert(w / banks);
    }
  }
  std::size_t worst = 1;
  for (const auto& [bank, rows] : rows_by_bank) worst = std::max(worst, rows.size());
  report.transactions += 1;
  report.bank_conflicts += worst - 1;
}

}  // namespace

LayoutReport simulate(const AccessPattern& pattern, const MemModel& model) {
  model.validate();
  const auto wb = static_cast<uint64_t>(model.word_bytes());
  LayoutReport report;
  for (const WarpRequest& req : pattern.requests) {
    if (req.lanes.empty()) continue;
    uint64_t widest = 0;
    for (const LaneAccess& a : req.lanes) {
      if (a.byte_length == 0) fail(ErrorKind::InvalidInput, "lane access of zero length");
      if (a.byte_offset + a.byte_length > pattern.extent_bytes) {
        fail(ErrorKind::Bounds, "lane " + std::to_string(a.lane) + " reads bytes [" +
                                    std::to_string(a.byte_offset) + ", " +
                                    std::to_string(a.byte_offset + a.byte_length) +
                                    ") beyond the layout extent of " + std::to_string(pattern.extent_bytes));
      }
      if (a.useful_bits > 8ull * a.byte_length) {
        fail(ErrorKind::InvalidInput, "lane " + std::to_string(a.lane) + " claims more useful bits than it reads");
      }
      const uint64_t moved = words_touched(a, wb) * static_cast<uint64_t>(model.bank_width_bits);
      report.useful_bits += a.useful_bits;
      report.moved_bits += moved;
      widest = std::max(widest, moved / 8);
    }
    const auto per_phase = static_cast<std::size_t>(
        std::clamp<uint64_t>(static_cast<uint64_t>(model.transaction_bytes) / widest, 1,
                             static_cast<uint64_t>(model.lane_count)));
    for (std::size_t begin = 0; begin < req.lanes.size(); begin += per_phase) {
      std::vector<const LaneAccess*> phase;
      for (std::size_t i = begin; i < std::min(req.lanes.size(), begin + per_phase); ++i) phase.push_back(&req.lanes[i]);
      account_phase(phase, model, report);
    }
  }
  if (report.moved_bits == 0) fail(ErrorKind::InvalidInput, "access pattern moves no data");
  report.utilization = static_cast<double>(report.useful_bits) / static_cast<double>(report.moved_bits);
  return report;
}

AccessPattern naive_layout_pattern(int bits, std::size_t rows, std::size_t cols) {
  if (bits != 4 && bits != 6 && bits != 8 && bits != 16) {
    fail(ErrorKind::InvalidInput, "naive layout supports 4, 6, 8 or 16-bit elements");
  }
  AccessPattern p;
  p.description = "naive row-major " + std::to_string(bits) + "-bit, " + std::to_string(rows) + "x" +
                  std::to_string(cols);
  const uint64_t elements = static_cast<uint64_t>(rows) * cols;
  const auto b = static_cast<uint64_t>(bits);
  p.extent_bytes = (elements * b + 7) / 8;
  const uint64_t lanes = (elements + 1) / 2;
  for (uint64_t lane = 0; lane < lanes; ++lane) {
    if (lane % 32 == 0) p.requests.emplace_back();
    const uint64_t first = 2 * lane;
    const uint64_t count = std::min<uint64_t>(2, elements - first);
    const uint64_t bit_begin = first * b;
    const uint64_t bit_end = bit_begin + count * b;
    LaneAccess a;
    a.lane = static_cast<int>(lane % 32);
    a.byte_offset = bit_begin / 8;
    a.byte_length = static_cast<uint32_t>((bit_end + 7) / 8 - a.byte_offset);
    a.useful_bits = static_cast<uint32_t>(count * b);
    p.requests.back().lanes.push_back(a);
  }
  return p;
}

ChunkedPatterns chunked_layout_pattern(const PackConfig& cfg, int bits, int bm, int bk) {
  cfg.validate();
  if (bits < 1 || bits > kMaxBits) fail(ErrorKind::Config, "unsupported plane count");
  if (cfg.chunk_k % 32 != 0) fail(ErrorKind::Config, "chunk_k must be a multiple of 32");
  if (bm <= 0 || bk <= 0 || bm % cfg.chunk_m != 0 || bk % cfg.chunk_k != 0) {
    fail(ErrorKind::Config, "tile " + std::to_string(bm) + "x" + std::to_string(bk) +
                                " is not a multiple of chunk " + std::to_string(cfg.chunk_m) + "x" +
                                std::to_string(cfg.chunk_k));
  }
  const uint64_t row_bytes = static_cast<uint64_t>(cfg.chunk_k) / 8;
  const uint64_t k_chunks = static_cast<uint64_t>(bk / cfg.chunk_k);
  const uint64_t row_chunks = static_cast<uint64_t>(bm / cfg.chunk_m);
  const uint64_t rows_per_block = static_cast<uint64_t>(bits) * cfg.chunk_m;  // plane rows of one chunk
  const uint64_t total = k_chunks * row_chunks * rows_per_block * row_bytes;

  ChunkedPatterns out;
  const std::string tag = std::to_string(bits) + "-bit BM=" + std::to_string(bm) + " BK=" + std::to_string(bk);
  out.global_to_shared.description = "chunked global->shared, " + tag;
  out.global_to_shared.extent_bytes = total;
  for (uint64_t off = 0, lane = 0; off < total; off += 16, ++lane) {
    if (lane % 32 == 0) out.global_to_shared.requests.emplace_back();
    out.global_to_shared.requests.back().lanes.push_back(
        {static_cast<int>(lane % 32), off, 16, 128});
  }

  // Each MMA operand fragment covers 32 lanes x 4 bytes: row_bytes / 4 lanes per plane row.
  out.shared_to_register.description = "chunked shared->register, " + tag;
  out.shared_to_register.extent_bytes = total;
  const uint64_t lanes_per_row = row_bytes / 4;
  const uint64_t rows_per_fragment = 32 / lanes_per_row;
  for (uint64_t block = 0; block < k_chunks * row_chunks; ++block) {
    const uint64_t base = block * rows_per_block * row_bytes;
    for (uint64_t r0 = 0; r0 < rows_per_block; r0 += rows_per_fragment) {
      WarpRequest req;
      for (uint64_t lane = 0; lane < 32; ++lane) {
        const uint64_t row = r0 + lane / lanes_per_row;
        if (row >= rows_per_block) break;  // zero-fill rows are not read
        req.lanes.push_back({static_cast<int>(lane), base + row * row_bytes + (lane % lanes_per_row) * 4, 4, 32});
      }
      out.shared_to_register.requests.push_back(std::move(req));
    }
  }
  return out;
}

AccessPattern filter_lanes(const AccessPattern& pattern, const std::function<bool(const LaneAccess&)>& keep) {
  AccessPattern out;
  out.description = pattern.description;
  out.extent_bytes = pattern.extent_bytes;
  for (const WarpRequest& req : pattern.requests) {
    WarpRequest kept;
    for (const LaneAccess& a : req.lanes) {
      if (keep(a)) kept.lanes.push_back(a);
    }
    if (!kept.lanes.empty()) out.requests.push_back(std::move(kept));
  }
  return out;
}

AccessPattern pad_pattern(const AccessPattern& pattern, uint32_t pad_bytes) {
  AccessPattern out = pattern;
  out.description += " +" + std::to_string(pad_bytes) + "B padding";
  out.extent_bytes += pad_bytes;
  for (WarpRequest& req : out.requests) {
    for (LaneAccess& a : req.lanes) a.byte_length += pad_bytes;
  }
  return out;
}

std::vector<GoldenFigure> golden_figures() {
  const AccessPattern fp16 = naive_layout_pattern(16, 1, 64);
  const AccessPattern int6 = naive_layout_pattern(6, 1, 256);
  const auto within = filter_lanes(int6, [](const LaneAccess& a) { return !straddles_word(a); });
  const auto across = filter_lanes(int6, [](const LaneAccess& a) { return straddles_word(a); });
  return {
      {"fp16_aligned", 1.0, simulate(fp16)},
      {"int6_naive", 0.375, simulate(within)},
      {"int6_naive_straddling", 0.1875, simulate(across)},
  };
}

}  // namespace flexq
