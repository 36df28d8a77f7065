#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flexq/bitpack.hpp"

namespace flexq {

enum class MemSpace {
  Shared,  // banked; one transaction per phase, replays for same-bank different-row words
  Global,  // coalesced; one transaction per aligned transaction_bytes segment per phase
};

struct MemModel {
  int bank_count = 32;
  int bank_width_bits = 32;
  int transaction_bytes = 128;
  int lane_count = 32;
  MemSpace space = MemSpace::Shared;

  int word_bytes() const { return bank_width_bits / 8; }
  void validate() const;
};

struct LaneAccess {
  int lane = 0;
  uint64_t byte_offset = 0;
  uint32_t byte_length = 0;
  uint32_t useful_bits = 0;  // payload bits the lane actually needs from the range
};

// One warp-wide load or store instruction.
struct WarpRequest {
  std::vector<LaneAccess> lanes;
};

struct AccessPattern {
  std::string description;
  uint64_t extent_bytes = 0;
  std::vector<WarpRequest> requests;
};

struct LayoutReport {
  uint64_t transactions = 0;
  uint64_t bank_conflicts = 0;
  uint64_t useful_bits = 0;
  uint64_t moved_bits = 0;
  double utilization = 0.0;
};

// Transfers are accounted per lane: every bank word a lane's byte range touches is moved
// in full for that lane. Lanes of a request are split into phases of
// transaction_bytes / (widest lane transfer) lanes; within a phase, each bank replays once
// per extra distinct row it is asked for. Identical words (broadcast) never conflict.
LayoutReport simulate(const AccessPattern& pattern, const MemModel& model = {});

// Row-major, tightly bit-packed elements; each lane reads two consecutive elements through
// the byte range covering their bits. Supports bits in {4, 6, 8, 16}.
AccessPattern naive_layout_pattern(int bits, std::size_t rows, std::size_t cols);

struct ChunkedPatterns {
  AccessPattern global_to_shared;    // 16 bytes per lane
  AccessPattern shared_to_register;  // 4 bytes per lane, one request per MMA operand fragment
};

// Lane-to-address maps of a BM x BK tile stored as [BK/chunk_k, BM/chunk_m, bits, chunk_m, chunk_k].
ChunkedPatterns chunked_layout_pattern(const PackConfig& cfg, int bits, int bm, int bk);

// True when the lane's byte range spans more than one bank word.
bool straddles_word(const LaneAccess& access, int word_bytes = 4);

AccessPattern filter_lanes(const AccessPattern& pattern, const std::function<bool(const LaneAccess&)>& keep);

// Widens every lane access by pad_bytes of dead payload.
AccessPattern pad_pattern(const AccessPattern& pattern, uint32_t pad_bytes);

struct GoldenFigure {
  std::string name;
  double expected = 0.0;
  LayoutReport report;
  bool passed() const { return report.utilization == expected; }
};

// FP16 aligned (1.0), naive 6-bit within a word (0.375), naive 6-bit straddling (0.1875).
std::vector<GoldenFigure> golden_figures();

}  // namespace flexq
