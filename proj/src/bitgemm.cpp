#include "flexq/bitgemm.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "flexq/error.hpp"
#include "pipeline.hpp"

namespace flexq {

GemmConfig GemmConfig::for_operands(const QuantTensor& weights, const QuantTensor& activations) {
  GemmConfig cfg;
  cfg.m = activations.rows;
  cfg.n = weights.rows;
  cfg.k = activations.cols;
  cfg.weight_bits = weights.bits;
  cfg.activation_bits = activations.bits;
  cfg.group_size = activations.group_size;
  return cfg;
}

void GemmConfig::validate() const {
  if (m == 0 || n == 0 || k == 0) fail(ErrorKind::Shape, "GEMM dimensions must be positive");
  if (weight_bits < kMinBits || weight_bits > kMaxBits || activation_bits < kMinBits ||
      activation_bits > kMaxBits) {
    fail(ErrorKind::Config, "precision pair (" + std::to_string(weight_bits) + ", " +
                                std::to_string(activation_bits) + ") outside [2, 8]");
  }
  if (group_size <= 0) fail(ErrorKind::Config, "group size must be positive");
  if (pipeline_stages < 1) fail(ErrorKind::Config, "pipeline_stages must be >= 1");
  if (worker_count < 1) fail(ErrorKind::Config, "worker_count must be >= 1");
  if (tile_m < 0 || tile_n <= 0 || tile_k <= 0) fail(ErrorKind::Config, "tile dimensions must be positive");
}

int32_t bmma_chunk(std::span<const uint64_t> w_words, std::span<const uint64_t> x_words) {
  if (w_words.size() != x_words.size()) {
    fail(ErrorKind::Shape, "bmma operands span " + std::to_string(w_words.size()) + " and " +
                               std::to_string(x_words.size()) + " words");
  }
  int32_t acc = 0;
  for (std::size_t i = 0; i < w_words.size(); ++i) acc += std::popcount(w_words[i] & x_words[i]);
  return acc;
}

void reduce_bits_into(const BitProductGrid& grid, Signedness w_sign, Signedness x_sign,
                      std::span<int64_t> out) {
  if (out.size() != grid.cells) fail(ErrorKind::Shape, "reduction output size mismatch");
  for (int s = 0; s < grid.p; ++s) {
    const int64_t cw = plane_coeff(s, grid.p, w_sign);
    for (int t = 0; t < grid.q; ++t) {
      const int64_t c = cw * plane_coeff(t, grid.q, x_sign);
      const int32_t* src = grid.partials.data() + (static_cast<std::size_t>(s) * grid.q + t) * grid.cells;
      for (std::size_t i = 0; i < grid.cells; ++i) out[i] += c * src[i];
    }
  }
}

std::vector<int64_t> reduce_bits(const BitProductGrid& grid, int p, int q, Signedness signedness) {
  if (p != grid.p || q != grid.q) fail(ErrorKind::Shape, "grid plane counts do not match (p, q)");
  std::vector<int64_t> out(grid.cells, 0);
  reduce_bits_into(grid, signedness, signedness, out);
  return out;
}

int fold_rounds(int chunk_m, int mma_m) {
  if (chunk_m < 1 || mma_m < 1 || !std::has_single_bit(static_cast<unsigned>(chunk_m)) ||
      !std::has_single_bit(static_cast<unsigned>(mma_m))) {
    fail(ErrorKind::Config, "lane fold needs power-of-two chunk_m and mma_m");
  }
  if (chunk_m > mma_m) fail(ErrorKind::Config, "chunk_m exceeds mma_m");
  return std::countr_zero(static_cast<unsigned>(mma_m)) - std::countr_zero(static_cast<unsigned>(chunk_m));
}

int fold_chunk_level(std::span<int64_t> lanes, std::size_t width, int chunk_m, int mma_m) {
  const int rounds = fold_rounds(chunk_m, mma_m);
  if (lanes.size() != static_cast<std::size_t>(mma_m) * width) {
    fail(ErrorKind::Shape, "lane buffer must hold mma_m rows");
  }
  for (int i = 0; i < rounds; ++i) {
    const auto offset = static_cast<std::size_t>(mma_m >> (i + 1));
    for (std::size_t j = 0; j < offset; ++j) {
      for (std::size_t c = 0; c < width; ++c) lanes[j * width + c] += lanes[(j + offset) * width + c];
    }
  }
  return rounds;
}

namespace {

struct Operands {
  const PackedTensor& w;
  const PackedTensor& x;
  std::span<const float> w_scales;
  std::span<const float> x_scales;
  const GemmConfig& cfg;
};

void check_operands(const Operands& op) {
  const GemmConfig& cfg = op.cfg;
  cfg.validate();
  if (op.x.rows != cfg.m || op.w.rows != cfg.n) {
    fail(ErrorKind::Shape, "activations have " + std::to_string(op.x.rows) + " rows and weights " +
                               std::to_string(op.w.rows) + " rows; config expects M=" +
                               std::to_string(cfg.m) + ", N=" + std::to_string(cfg.n));
  }
  if (op.x.cols != cfg.k || op.w.cols != cfg.k) {
    fail(ErrorKind::Shape, "K mismatch: activations K=" + std::to_string(op.x.cols) + ", weights K=" +
                               std::to_string(op.w.cols) + ", config K=" + std::to_string(cfg.k));
  }
  if (op.w.bits != cfg.weight_bits || op.x.bits != cfg.activation_bits) {
    fail(ErrorKind::Shape, "packed plane counts do not match the configured precision pair");
  }
  if (op.w.config.chunk_k != op.x.config.chunk_k || op.w.config.word_bits != op.x.config.word_bits) {
    fail(ErrorKind::Config, "weights and activations use different chunk_k or word width");
  }
  if (cfg.group_size % op.x.config.chunk_k != 0) {
    fail(ErrorKind::Config, "group size " + std::to_string(cfg.group_size) +
                                " is not a multiple of chunk_k " + std::to_string(op.x.config.chunk_k));
  }
  const std::size_t groups = cfg.groups();
  if (op.w_scales.size() != cfg.n * groups) {
    fail(ErrorKind::Shape, "weights carry " + std::to_string(op.w_scales.size()) + " scales, expected " +
                               std::to_string(cfg.n * groups));
  }
  if (op.x_scales.size() != cfg.m * groups) {
    fail(ErrorKind::Shape, "activations carry " + std::to_string(op.x_scales.size()) +
                               " scales, expected " + std::to_string(cfg.m * groups));
  }
}

// Multiplies one k-chunk of a (row-chunk, weight-chunk) pair: p * q binary passes, then the
// bit-significance reduction. When chunk_m < mma_m the activation planes are spread over
// mma_m / chunk_m lane groups and combined with the chunk-level fold.
class ChunkPairKernel {
 public:
  ChunkPairKernel(const PackedTensor& w, const PackedTensor& x)
      : p_(w.bits), q_(x.bits), cm_(x.config.chunk_m), cn_(w.config.chunk_m),
        wpc_(static_cast<std::size_t>(x.config.words_per_chunk_row())), mma_m_(x.config.mma_m),
        w_sign_(w.signedness), x_sign_(x.signedness),
        grid_(w.bits, x.bits, static_cast<std::size_t>(cm_) * cn_) {
    const bool foldable = std::has_single_bit(static_cast<unsigned>(cm_)) &&
                          std::has_single_bit(static_cast<unsigned>(mma_m_)) && cm_ < mma_m_;
    lane_groups_ = foldable ? mma_m_ / cm_ : 1;
    if (lane_groups_ > 1) lanes_.assign(static_cast<std::size_t>(mma_m_) * cn_, 0);
    for (int s = 0; s < p_; ++s) w_coef_.push_back(plane_coeff(s, p_, w_sign_));
    for (int t = 0; t < q_; ++t) x_coef_.push_back(plane_coeff(t, q_, x_sign_));
  }

  std::size_t cells() const { return grid_.cells; }
  uint64_t passes() const { return passes_; }

  // w_block: [p][chunk_n][wpc] words, x_block: [q][chunk_m][wpc] words. Adds into acc.
  void accumulate(const uint64_t* w_block, const uint64_t* x_block, std::span<int64_t> acc) {
    for (int s = 0; s < p_; ++s) {
      for (int t = 0; t < q_; ++t) {
        ++passes_;
        for (int m = 0; m < cm_; ++m) {
          const std::span<const uint64_t> xrow(x_block + (static_cast<std::size_t>(t) * cm_ + m) * wpc_, wpc_);
          for (int n = 0; n < cn_; ++n) {
            const std::span<const uint64_t> wrow(w_block + (static_cast<std::size_t>(s) * cn_ + n) * wpc_, wpc_);
            grid_.at(s, t, static_cast<std::size_t>(m) * cn_ + n) = bmma_chunk(wrow, xrow);
          }
        }
      }
    }
    if (lane_groups_ == 1) {
      reduce_bits_into(grid_, w_sign_, x_sign_, acc);
      return;
    }
    std::fill(lanes_.begin(), lanes_.end(), 0);
    for (int s = 0; s < p_; ++s) {
      for (int t = 0; t < q_; ++t) {
        const int64_t c = w_coef_[s] * x_coef_[t];
        int64_t* lane = lanes_.data() + static_cast<std::size_t>(t % lane_groups_) * grid_.cells;
        for (std::size_t i = 0; i < grid_.cells; ++i) lane[i] += c * grid_.at(s, t, i);
      }
    }
    fold_chunk_level(lanes_, static_cast<std::size_t>(cn_), cm_, mma_m_);
    for (std::size_t i = 0; i < grid_.cells; ++i) acc[i] += lanes_[i];
  }

 private:
  int p_, q_, cm_, cn_;
  std::size_t wpc_;
  int mma_m_;
  Signedness w_sign_, x_sign_;
  BitProductGrid grid_;
  int lane_groups_ = 1;
  std::vector<int64_t> lanes_;
  std::vector<int64_t> w_coef_, x_coef_;
  uint64_t passes_ = 0;
};

// Running state of the chunk_m x chunk_n output cells of one chunk pair.
struct CellBlock {
  std::size_t row_chunk = 0;
  std::size_t col_chunk = 0;
  std::vector<int64_t> group_acc;
  std::vector<double> acc;
  std::ptrdiff_t group = -1;
};

class Accumulator {
 public:
  Accumulator(const Operands& op, GemmOutput& out)
      : op_(op), out_(out), cm_(static_cast<std::size_t>(op.x.config.chunk_m)),
        cn_(static_cast<std::size_t>(op.w.config.chunk_m)), groups_(op.cfg.groups()),
        chunk_k_(static_cast<std::size_t>(op.x.config.chunk_k)),
        group_size_(static_cast<std::size_t>(op.cfg.group_size)) {}

  CellBlock make_block(std::size_t rc, std::size_t nc) const {
    CellBlock b;
    b.row_chunk = rc;
    b.col_chunk = nc;
    b.group_acc.assign(cm_ * cn_, 0);
    b.acc.assign(cm_ * cn_, 0.0);
    return b;
  }

  void step(CellBlock& b, std::size_t kc, ChunkPairKernel& kernel, const uint64_t* w_block,
            const uint64_t* x_block) const {
    const auto g = static_cast<std::ptrdiff_t>(kc * chunk_k_ / group_size_);
    if (b.group != g) {
      if (b.group >= 0) flush(b);
      b.group = g;
    }
    kernel.accumulate(w_block, x_block, b.group_acc);
  }

  void finish(CellBlock& b) const {
    if (b.group >= 0) flush(b);
    for (std::size_t m = 0; m < cm_; ++m) {
      const std::size_t row = b.row_chunk * cm_ + m;
      if (row >= op_.cfg.m) continue;
      for (std::size_t n = 0; n < cn_; ++n) {
        const std::size_t col = b.col_chunk * cn_ + n;
        if (col >= op_.cfg.n) continue;
        out_.data.at(row, col) = static_cast<float>(b.acc[m * cn_ + n]);
      }
    }
  }

 private:
  void flush(CellBlock& b) const {
    const auto g = static_cast<std::size_t>(b.group);
    for (std::size_t m = 0; m < cm_; ++m) {
      const std::size_t row = b.row_chunk * cm_ + m;
      for (std::size_t n = 0; n < cn_; ++n) {
        const std::size_t col = b.col_chunk * cn_ + n;
        const std::size_t cell = m * cn_ + n;
        if (row < op_.cfg.m && col < op_.cfg.n) {
          const float sw = op_.w_scales[col * groups_ + g];
          const float sx = op_.x_scales[row * groups_ + g];
          b.acc[cell] += static_cast<double>(sw) * static_cast<double>(sx) *
                         static_cast<double>(b.group_acc[cell]);
          if (op_.cfg.trace) out_.group_partials[(row * op_.cfg.n + col) * groups_ + g] = b.group_acc[cell];
        }
        b.group_acc[cell] = 0;
      }
    }
  }

  const Operands& op_;
  GemmOutput& out_;
  std::size_t cm_, cn_, groups_, chunk_k_, group_size_;
};

GemmOutput make_output(const GemmConfig& cfg) {
  GemmOutput out;
  out.data = FloatTensor(cfg.m, cfg.n);
  if (cfg.trace) out.group_partials.assign(cfg.m * cfg.n * cfg.groups(), 0);
  return out;
}

std::size_t block_words(const PackedTensor& t) {
  return static_cast<std::size_t>(t.bits) * t.config.chunk_m * t.config.words_per_chunk_row();
}

// One output tile: a range of activation row-chunks and weight row-chunks.
struct Tile {
  std::size_t rc0, rc_count;
  std::size_t nc0, nc_count;
};

// Operand words of one (tile, k-range) job, gathered into contiguous blocks
// indexed [k-chunk][row-chunk].
struct StageBuffer {
  std::size_t tile = 0;
  std::size_t kc0 = 0;
  std::size_t kc_count = 0;
  std::vector<uint64_t> x_words;
  std::vector<uint64_t> w_words;
};

class TiledExecutor {
 public:
  TiledExecutor(const Operands& op, GemmOutput& out) : op_(op), out_(out), acc_(op, out) {
    const GemmConfig& cfg = op.cfg;
    const auto cm = static_cast<std::size_t>(op.x.config.chunk_m);
    const auto cn = static_cast<std::size_t>(op.w.config.chunk_m);
    const auto ck = static_cast<std::size_t>(op.x.config.chunk_k);
    const std::size_t tile_m = cfg.tile_m > 0 ? static_cast<std::size_t>(cfg.tile_m)
                                              : cm * std::max<std::size_t>(1, 8 / cm);
    const auto tile_n = static_cast<std::size_t>(cfg.tile_n);
    const auto tile_k = static_cast<std::size_t>(cfg.tile_k);
    if (tile_m % cm != 0 || tile_n % cn != 0 || tile_k % ck != 0) {
      fail(ErrorKind::Config, "tile " + std::to_string(tile_m) + "x" + std::to_string(tile_n) + "x" +
                                  std::to_string(tile_k) + " is not a multiple of the chunk dims " +
                                  std::to_string(cm) + "x" + std::to_string(cn) + "x" + std::to_string(ck));
    }
    rc_per_tile_ = tile_m / cm;
    nc_per_tile_ = tile_n / cn;
    kc_per_tile_ = tile_k / ck;
    const std::size_t rcs = op.x.row_chunks();
    const std::size_t ncs = op.w.row_chunks();
    for (std::size_t rc = 0; rc < rcs; rc += rc_per_tile_) {
      for (std::size_t nc = 0; nc < ncs; nc += nc_per_tile_) {
        tiles_.push_back({rc, std::min(rc_per_tile_, rcs - rc), nc, std::min(nc_per_tile_, ncs - nc)});
      }
    }
  }

  uint64_t run() {
    const auto workers = static_cast<std::size_t>(op_.cfg.worker_count);
    std::vector<uint64_t> passes(workers, 0);
    if (workers == 1) {
      passes[0] = run_worker(0, 1);
    } else {
      std::vector<std::jthread> threads;
      threads.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([this, w, workers, &passes] { passes[w] = run_worker(w, workers); });
      }
    }
    uint64_t total = 0;
    for (uint64_t p : passes) total += p;
    return total;
  }

 private:
  struct Job {
    std::size_t tile;
    std::size_t kc0;
    std::size_t kc_count;
  };

  std::vector<Job> jobs_for(std::size_t worker, std::size_t workers) const {
    std::vector<Job> jobs;
    const std::size_t kcs = op_.x.k_chunks();
    for (std::size_t t = worker; t < tiles_.size(); t += workers) {
      for (std::size_t kc = 0; kc < kcs; kc += kc_per_tile_) jobs.push_back({t, kc, std::min(kc_per_tile_, kcs - kc)});
    }
    return jobs;
  }

  void gather(const Job& job, StageBuffer& buf) const {
    const Tile& tile = tiles_[job.tile];
    buf.tile = job.tile;
    buf.kc0 = job.kc0;
    buf.kc_count = job.kc_count;
    const std::size_t xb = block_words(op_.x);
    const std::size_t wb = block_words(op_.w);
    buf.x_words.resize(job.kc_count * tile.rc_count * xb);
    buf.w_words.resize(job.kc_count * tile.nc_count * wb);
    for (std::size_t i = 0; i < job.kc_count; ++i) {
      const std::size_t kc = job.kc0 + i;
      for (std::size_t r = 0; r < tile.rc_count; ++r) {
        const auto src = op_.x.words.begin() + static_cast<std::ptrdiff_t>(op_.x.word_index(kc, tile.rc0 + r, 0, 0, 0));
        std::copy(src, src + static_cast<std::ptrdiff_t>(xb), buf.x_words.begin() + static_cast<std::ptrdiff_t>((i * tile.rc_count + r) * xb));
      }
      for (std::size_t n = 0; n < tile.nc_count; ++n) {
        const auto src = op_.w.words.begin() + static_cast<std::ptrdiff_t>(op_.w.word_index(kc, tile.nc0 + n, 0, 0, 0));
        std::copy(src, src + static_cast<std::ptrdiff_t>(wb), buf.w_words.begin() + static_cast<std::ptrdiff_t>((i * tile.nc_count + n) * wb));
      }
    }
  }

  void compute(const StageBuffer& buf, ChunkPairKernel& kernel, std::vector<CellBlock>& blocks) const {
    const Tile& tile = tiles_[buf.tile];
    if (buf.kc0 == 0) {
      blocks.clear();
      for (std::size_t r = 0; r < tile.rc_count; ++r) {
        for (std::size_t n = 0; n < tile.nc_count; ++n) blocks.push_back(acc_.make_block(tile.rc0 + r, tile.nc0 + n));
      }
    }
    const std::size_t xb = block_words(op_.x);
    const std::size_t wb = block_words(op_.w);
    for (std::size_t r = 0; r < tile.rc_count; ++r) {
      for (std::size_t n = 0; n < tile.nc_count; ++n) {
        CellBlock& b = blocks[r * tile.nc_count + n];
        for (std::size_t i = 0; i < buf.kc_count; ++i) {
          acc_.step(b, buf.kc0 + i, kernel, buf.w_words.data() + (i * tile.nc_count + n) * wb,
                    buf.x_words.data() + (i * tile.rc_count + r) * xb);
        }
      }
    }
    if (buf.kc0 + buf.kc_count == op_.x.k_chunks()) {
      for (CellBlock& b : blocks) acc_.finish(b);
    }
  }

  uint64_t run_worker(std::size_t worker, std::size_t workers) const {
    const std::vector<Job> jobs = jobs_for(worker, workers);
    ChunkPairKernel kernel(op_.w, op_.x);
    std::vector<CellBlock> blocks;
    const auto stages = static_cast<std::size_t>(op_.cfg.pipeline_stages);
    if (stages == 1) {
      StageBuffer buf;
      for (const Job& job : jobs) {
        gather(job, buf);
        compute(buf, kernel, blocks);
      }
      return kernel.passes();
    }
    // Prefetcher fills up to `stages` buffers ahead of the compute loop.
    std::vector<StageBuffer> ring(stages);
    detail::BoundedQueue<std::size_t> free_slots(stages);
    detail::BoundedQueue<std::size_t> ready(stages);
    for (std::size_t s = 0; s < stages; ++s) free_slots.push(s);
    std::jthread prefetcher([&] {
      for (const Job& job : jobs) {
        const std::size_t slot = free_slots.pop();
        gather(job, ring[slot]);
        ready.push(slot);
      }
    });
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      const std::size_t slot = ready.pop();
      compute(ring[slot], kernel, blocks);
      free_slots.push(slot);
    }
    return kernel.passes();
  }

  const Operands& op_;
  GemmOutput& out_;
  Accumulator acc_;
  std::size_t rc_per_tile_ = 1, nc_per_tile_ = 1, kc_per_tile_ = 1;
  std::vector<Tile> tiles_;
};

}  // namespace

GemmOutput group_matmul_fused(const PackedTensor& weights, const PackedTensor& activations,
                              std::span<const float> w_scales, std::span<const float> x_scales,
                              const GemmConfig& cfg) {
  const Operands op{weights, activations, w_scales, x_scales, cfg};
  check_operands(op);
  GemmOutput out = make_output(cfg);
  Accumulator acc(op, out);
  ChunkPairKernel kernel(weights, activations);
  for (std::size_t rc = 0; rc < activations.row_chunks(); ++rc) {
    for (std::size_t nc = 0; nc < weights.row_chunks(); ++nc) {
      CellBlock b = acc.make_block(rc, nc);
      for (std::size_t kc = 0; kc < activations.k_chunks(); ++kc) {
        acc.step(b, kc, kernel, weights.words.data() + weights.word_index(kc, nc, 0, 0, 0),
                 activations.words.data() + activations.word_index(kc, rc, 0, 0, 0));
      }
      acc.finish(b);
    }
  }
  out.bmma_passes = kernel.passes();
  return out;
}

GemmOutput execute_tiled(const PackedTensor& weights, const PackedTensor& activations,
                         std::span<const float> w_scales, std::span<const float> x_scales,
                         const GemmConfig& cfg) {
  const Operands op{weights, activations, w_scales, x_scales, cfg};
  check_operands(op);
  GemmOutput out = make_output(cfg);
  TiledExecutor exec(op, out);
  out.bmma_passes = exec.run();
  return out;
}

GemmOutput int_matmul_reference(const QuantTensor& weights, const QuantTensor& activations,
                                const GemmConfig& cfg) {
  cfg.validate();
  weights.validate();
  activations.validate();
  if (activations.rows != cfg.m || weights.rows != cfg.n || activations.cols != cfg.k ||
      weights.cols != cfg.k) {
    fail(ErrorKind::Shape, "operand shapes [" + std::to_string(activations.rows) + "x" +
                               std::to_string(activations.cols) + "] (activations) and [" +
                               std::to_string(weights.rows) + "x" + std::to_string(weights.cols) +
                               "] (weights) do not match the config");
  }
  if (weights.group_size != cfg.group_size || activations.group_size != cfg.group_size) {
    fail(ErrorKind::Shape, "operand group sizes differ from the config");
  }
  GemmOutput out = make_output(cfg);
  const std::size_t groups = cfg.groups();
  const auto gs = static_cast<std::size_t>(cfg.group_size);
  for (std::size_t m = 0; m < cfg.m; ++m) {
    for (std::size_t n = 0; n < cfg.n; ++n) {
      double acc = 0.0;
      for (std::size_t g = 0; g < groups; ++g) {
        int64_t dot = 0;
        const std::size_t end = std::min(cfg.k, (g + 1) * gs);
        for (std::size_t k = g * gs; k < end; ++k) {
          dot += int64_t{activations.value(m, k)} * int64_t{weights.value(n, k)};
        }
        acc += static_cast<double>(weights.scales[n * groups + g]) *
               static_cast<double>(activations.scales[m * groups + g]) * static_cast<double>(dot);
        if (cfg.trace) out.group_partials[(m * cfg.n + n) * groups + g] = dot;
      }
      out.data.at(m, n) = static_cast<float>(acc);
    }
  }
  return out;
}

GemmOutput quantized_matmul(const QuantTensor& weights, const QuantTensor& activations,
                            const GemmConfig& cfg, int word_bits) {
  if (weights.group_size != cfg.group_size || activations.group_size != cfg.group_size) {
    fail(ErrorKind::Shape, "weights use group size " + std::to_string(weights.group_size) +
                               " and activations " + std::to_string(activations.group_size) +
                               "; config expects " + std::to_string(cfg.group_size));
  }
  const PackedTensor wp = pack(weights, PackConfig::for_weights(word_bits));
  const PackedTensor xp = pack(activations, PackConfig::for_activations(activations.rows, word_bits));
  return execute_tiled(wp, xp, weights.scales, activations.scales, cfg);
}

FloatTensor float_matmul(const FloatTensor& weights, const FloatTensor& activations) {
  if (weights.cols != activations.cols) fail(ErrorKind::Shape, "K mismatch in float GEMM");
  FloatTensor out(activations.rows, weights.rows);
  for (std::size_t m = 0; m < activations.rows; ++m) {
    for (std::size_t n = 0; n < weights.rows; ++n) {
      double acc = 0.0;
      for (std::size_t k = 0; k < weights.cols; ++k) {
        acc += static_cast<double>(activations.at(m, k)) * static_cast<double>(weights.at(n, k));
      }
      out.at(m, n) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace flexq
