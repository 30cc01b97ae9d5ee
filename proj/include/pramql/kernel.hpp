// Simulated CRCW PRAM with exact work/depth/space accounting.
//
// The machine executes bulk-synchronous rounds: a round schedules a number
// of processors, each running the same step body with its processor id.
// Reads within a round observe the pre-round snapshot; writes become visible
// after the round, with conflicts resolved per the configured write mode
// (Common / Arbitrary / Priority). "Constant time" claims are always about
// the depth counter (number of rounds), never wall clock.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pramql {

using word = std::uint64_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;

enum class fault_kind {
  conflict,   // Common-mode write conflict
  bounds,     // out-of-range cell access
  parameter,  // bad lambda/epsilon/width/etc.
  setting,    // operation not available in the database's setting
  mode,       // wrong write mode for the algorithm
  overflow,   // word overflow in a macro step
  parse,      // input text could not be parsed
  schema,     // relation schema mismatch
  decomposition,  // invalid join tree / GHD
  io,         // file errors
};

class fault : public std::runtime_error {
 public:
  fault(fault_kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  fault_kind kind() const { return kind_; }

 private:
  fault_kind kind_;
};

enum class WriteMode { Common, Arbitrary, Priority };

struct MachineConfig {
  WriteMode write_mode = WriteMode::Arbitrary;
  u64 arbitrary_seed = 0;
  bool accounting_enabled = true;
  unsigned macro_width = 64;  // max operand count of exact_sum_small
};

struct PhaseEntry {
  std::string label;
  u64 work = 0;
  u64 depth = 0;
  u64 space = 0;  // high-water at phase end
};

struct Metrics {
  u64 work = 0;   // sum over rounds of scheduled processors (plus macro charges)
  u64 depth = 0;  // number of synchronous rounds
  u64 space = 0;  // total cells ever allocated (max address + 1)
  std::vector<PhaseEntry> phases;
};

struct ArrayHandle {
  u64 id = std::numeric_limits<u64>::max();
  bool valid() const { return id != std::numeric_limits<u64>::max(); }
};

namespace detail {

inline u64 splitmix64(u64 x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Arbitration key for Arbitrary mode: deterministic in (seed, round, address,
// processor), so any failure replays bit-identically from the seed.
inline u64 arbitration_key(u64 seed, u64 round, u64 address, u64 proc) {
  u64 h = splitmix64(seed ^ splitmix64(round));
  h = splitmix64(h ^ splitmix64(address));
  return splitmix64(h ^ splitmix64(proc));
}

}  // namespace detail

// Stand-alone conflict resolution, usable for testing the rule in isolation.
// `pending` is the list of (processor id, value) writes to one cell.
inline word resolve_writes(const std::vector<std::pair<u64, word>>& pending,
                           WriteMode mode, u64 seed, u64 round, u64 address) {
  if (pending.empty())
    throw fault(fault_kind::parameter, "resolve_writes: empty pending set");
  switch (mode) {
    case WriteMode::Priority: {
      auto best = pending.front();
      for (const auto& p : pending)
        if (p.first < best.first) best = p;
      return best.second;
    }
    case WriteMode::Common: {
      for (const auto& p : pending)
        if (p.second != pending.front().second)
          throw fault(fault_kind::conflict,
                      "Common-mode conflict at round " + std::to_string(round) +
                          ", address " + std::to_string(address));
      return pending.front().second;
    }
    case WriteMode::Arbitrary: {
      auto best = pending.front();
      u64 best_key =
          detail::arbitration_key(seed, round, address, best.first);
      for (const auto& p : pending) {
        u64 key = detail::arbitration_key(seed, round, address, p.first);
        if (key < best_key || (key == best_key && p.first < best.first)) {
          best = p;
          best_key = key;
        }
      }
      return best.second;
    }
  }
  throw fault(fault_kind::parameter, "unknown write mode");
}

class Machine;

// Per-processor view of the machine inside a round.
class Step {
 public:
  Step(Machine& m, u64 proc) : m_(m), proc_(proc) {}
  u64 proc() const { return proc_; }
  word read(ArrayHandle h, u64 i) const;
  void write(ArrayHandle h, u64 i, word v);
  void charge(u64 extra_work);  // macro-step cost beyond the processor's one step
  u64 size(ArrayHandle h) const;  // array length, available in O(1)

 private:
  Machine& m_;
  u64 proc_;
};

class Machine {
 public:
  explicit Machine(MachineConfig cfg = {}) : cfg_(cfg) {}

  const MachineConfig& config() const { return cfg_; }
  const Metrics& metrics() const { return metrics_; }
  u64 round() const { return round_; }

  ArrayHandle allocate(u64 size) {
    Region r;
    r.base = next_address_;
    r.cells.resize(size);
    next_address_ += size;
    metrics_.space = next_address_;
    arrays_.push_back(std::move(r));
    return ArrayHandle{arrays_.size() - 1};
  }

  // Retire a scratch region: host memory is freed, the space high-water mark
  // stays (the model's space measure is the maximal address ever used).
  void release(ArrayHandle h) {
    Region& r = region(h);
    r.released_size_ = r.cells.size();
    r.cells.clear();
    r.cells.shrink_to_fit();
    r.released = true;
  }

  u64 size(ArrayHandle h) const { return region(h).released_size(); }

  // Execute one synchronous round with processors 1..proc_count.
  // The body must be deterministic and access memory only through Step.
  template <typename F>
  void step(u64 proc_count, F&& body) {
    ++round_;
    metrics_.depth += 1;
    metrics_.work += proc_count;
    for (u64 p = 1; p <= proc_count; ++p) {
      Step s(*this, p);
      body(s, p);
    }
  }

  // Constant-depth exact sum of at most macro_width word-size naturals.
  // Charged k^2 work and one round, standing in for the constant-depth
  // addition circuitry the model otherwise provides for small operands.
  word exact_sum_small(std::initializer_list<word> values) {
    return exact_sum_small(std::vector<word>(values));
  }
  word exact_sum_small(const std::vector<word>& values) {
    u64 k = values.size();
    if (k > cfg_.macro_width)
      throw fault(fault_kind::parameter,
                  "exact_sum_small: " + std::to_string(k) +
                      " operands exceed macro width " +
                      std::to_string(cfg_.macro_width));
    ++round_;
    metrics_.depth += 1;
    metrics_.work += k * k;
    word sum = 0;
    for (word v : values) {
      if (sum > std::numeric_limits<word>::max() - v)
        throw fault(fault_kind::overflow, "exact_sum_small: word overflow");
      sum += v;
    }
    return sum;
  }

  // Extra work charged from inside a step body (macro-step cost model).
  void charge(u64 extra_work) { metrics_.work += extra_work; }

  void begin_phase(const std::string& label) {
    phase_stack_.push_back({label, metrics_.work, metrics_.depth});
  }
  void end_phase() {
    if (phase_stack_.empty())
      throw fault(fault_kind::parameter, "end_phase without begin_phase");
    auto [label, w0, d0] = phase_stack_.back();
    phase_stack_.pop_back();
    metrics_.phases.push_back(
        {label, metrics_.work - w0, metrics_.depth - d0, metrics_.space});
  }

  // Host-side staging access (input loading / output extraction); not part
  // of the accounted computation.
  word host_read(ArrayHandle h, u64 i) const {
    const Region& r = region(h);
    check_bounds(r, i);
    return r.cells[i].value;
  }
  void host_write(ArrayHandle h, u64 i, word v) {
    Region& r = region(h);
    check_bounds(r, i);
    r.cells[i].value = v;
    r.cells[i].round = 0;
  }

 private:
  friend class Step;

  struct Cell {
    word value = 0;
    word old_value = 0;
    u64 round = 0;     // last round that wrote this cell (0 = never)
    u64 winner = 0;    // arbitration key of the current round winner
    u64 winner_proc = 0;
  };

  struct Region {
    u64 base = 0;
    std::vector<Cell> cells;
    bool released = false;
    u64 released_size_ = 0;
    u64 released_size() const { return released ? released_size_ : cells.size(); }
  };

  Region& region(ArrayHandle h) {
    if (!h.valid() || h.id >= arrays_.size())
      throw fault(fault_kind::bounds, "invalid array handle");
    return arrays_[h.id];
  }
  const Region& region(ArrayHandle h) const {
    if (!h.valid() || h.id >= arrays_.size())
      throw fault(fault_kind::bounds, "invalid array handle");
    return arrays_[h.id];
  }
  void check_bounds(const Region& r, u64 i) const {
    if (r.released)
      throw fault(fault_kind::bounds, "access to released array");
    if (i >= r.cells.size())
      throw fault(fault_kind::bounds,
                  "cell index " + std::to_string(i) + " out of range (size " +
                      std::to_string(r.cells.size()) + ")");
  }

  word snapshot_read(ArrayHandle h, u64 i) const {
    const Region& r = region(h);
    check_bounds(r, i);
    const Cell& c = r.cells[i];
    return c.round == round_ ? c.old_value : c.value;
  }

  void round_write(u64 proc, ArrayHandle h, u64 i, word v) {
    Region& r = region(h);
    check_bounds(r, i);
    Cell& c = r.cells[i];
    u64 address = r.base + i;
    if (c.round != round_) {
      c.old_value = c.value;
      c.round = round_;
      c.value = v;
      c.winner = cfg_.write_mode == WriteMode::Arbitrary
                     ? detail::arbitration_key(cfg_.arbitrary_seed, round_,
                                               address, proc)
                     : 0;
      c.winner_proc = proc;
      return;
    }
    // Concurrent write in the same round: resolve per mode.
    switch (cfg_.write_mode) {
      case WriteMode::Common:
        if (c.value != v)
          throw fault(fault_kind::conflict,
                      "Common-mode conflict at round " +
                          std::to_string(round_) + ", address " +
                          std::to_string(address));
        break;
      case WriteMode::Priority:
        if (proc < c.winner_proc) {
          c.value = v;
          c.winner_proc = proc;
        }
        break;
      case WriteMode::Arbitrary: {
        u64 key = detail::arbitration_key(cfg_.arbitrary_seed, round_, address,
                                          proc);
        if (key < c.winner || (key == c.winner && proc < c.winner_proc)) {
          c.value = v;
          c.winner = key;
          c.winner_proc = proc;
        }
        break;
      }
    }
  }

  MachineConfig cfg_;
  Metrics metrics_;
  std::vector<Region> arrays_;
  u64 next_address_ = 0;
  u64 round_ = 0;
  std::vector<std::tuple<std::string, u64, u64>> phase_stack_;
};

inline word Step::read(ArrayHandle h, u64 i) const {
  return m_.snapshot_read(h, i);
}
inline void Step::write(ArrayHandle h, u64 i, word v) {
  m_.round_write(proc_, h, i, v);
}
inline void Step::charge(u64 extra_work) { m_.charge(extra_work); }
inline u64 Step::size(ArrayHandle h) const { return m_.size(h); }

}  // namespace pramql
