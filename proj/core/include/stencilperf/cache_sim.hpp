#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "stencilperf/interpreter.hpp"
#include "stencilperf/machine.hpp"
#include "stencilperf/stencil.hpp"
#include "stencilperf/traffic.hpp"

namespace sperf {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AccessKind : std::uint8_t { load, store };

struct MemoryAccess {
  AccessKind kind = AccessKind::load;
  std::uint64_t address = 0;
  friend bool operator==(const MemoryAccess&, const MemoryAccess&) = default;
};

/// Byte base address of every kernel array. Arrays are packed in the order
/// read, write, weight components, each starting on a line boundary.
struct ArrayLayout {
  std::uint64_t read_base = 0;
  std::uint64_t write_base = 0;
  std::vector<std::uint64_t> weight_bases;
  std::uint64_t end = 0;
};

ArrayLayout array_layout(const KernelIR& kernel, const GridDims& dims, unsigned line_size = 64);

/// Calls `sink` for every access of one sweep in program order: per interior
/// point, each distinct load in expression order (weight before data), then
/// the store.
void for_each_access(const KernelIR& kernel, const GridDims& dims, const Traversal& traversal,
                     unsigned line_size, const std::function<void(const MemoryAccess&)>& sink);

/// Materialized form of for_each_access for small grids.
std::vector<MemoryAccess> address_stream(const KernelIR& kernel, const GridDims& dims,
                                         const Traversal& traversal = {}, unsigned line_size = 64);

/// Writes one `<L|S> 0x<hex address>` line per access.
void dump_trace(std::ostream& os, const KernelIR& kernel, const GridDims& dims,
                const Traversal& traversal = {}, unsigned line_size = 64);

struct LevelCounters {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  std::uint64_t write_backs = 0;
  friend bool operator==(const LevelCounters&, const LevelCounters&) = default;
};

/// Byte volume across the link below a level.
struct LinkCounters {
  std::uint64_t load_bytes = 0;
  std::uint64_t store_bytes = 0;
};

/// Multi-level set-associative cache with strict per-set LRU replacement.
///
/// Non-victim levels are inclusive of the levels above them: evicting a line
/// invalidates it upstream, merging dirty state into the write-back. A victim
/// last level is filled only by evictions from the level above and gives up a
/// line when it is reloaded.
class CacheHierarchySim {
 public:
  explicit CacheHierarchySim(std::vector<CacheLevelSpec> levels, std::size_t element_bytes = 8);
  ~CacheHierarchySim();
  CacheHierarchySim(CacheHierarchySim&&) noexcept;
  CacheHierarchySim& operator=(CacheHierarchySim&&) noexcept;

  /// Returns true when the access hit the first level.
  bool access(const MemoryAccess& a);
  bool load(std::uint64_t address) { return access({AccessKind::load, address}); }
  bool store(std::uint64_t address) { return access({AccessKind::store, address}); }

  void reset_counters();
  bool contains(std::size_t level, std::uint64_t address) const;
  bool is_dirty(std::size_t level, std::uint64_t address) const;
  std::size_t resident_lines(std::size_t level) const;

  const std::vector<CacheLevelSpec>& levels() const;
  const LevelCounters& counters(std::size_t level) const;
  /// links(i) is the traffic between level i and level i+1 (or memory).
  const LinkCounters& link(std::size_t level) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct SimulationOptions {
  int warmup_sweeps = 1;
  /// Largest grid (points per array) the simulator agrees to enumerate.
  std::size_t element_budget = std::size_t{1} << 22;
  Traversal traversal;
  std::ostream* trace = nullptr;  // measured sweep only
};

struct SimulationResult {
  TrafficPrediction traffic;
  std::vector<LevelCounters> counters;
  std::vector<LinkCounters> links;
  std::uint64_t accesses = 0;
};

SimulationResult simulate_cache(const KernelIR& kernel, const MachineModel& machine,
                                const GridDims& dims, const SimulationOptions& options = {});

}  // namespace sperf
