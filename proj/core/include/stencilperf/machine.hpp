#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sperf {

/// A machine description failed to parse or violates the schema. The message
/// names the offending field by its path, e.g. "cache_levels[1].size_bytes".
class MachineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Duplex { full, half };
enum class OverlapPolicy { intel_no_overlap, zen_partial_overlap };

std::string_view to_string(Duplex d);
std::string_view to_string(OverlapPolicy p);

struct CacheLevelSpec {
  std::string name;
  std::uint64_t size_bytes = 0;
  unsigned ways = 0;
  unsigned line_size = 64;
  bool write_allocate = true;
  bool write_back = true;
  /// Filled only by evictions from the level above; never by loads.
  bool victim = false;
  /// Bytes per cycle on the path between this level and the next-closer one.
  /// Informational for L1 (register traffic is modeled by the port model).
  double upstream_bandwidth = 0;
  Duplex duplex = Duplex::full;

  std::uint64_t sets() const { return size_bytes / (static_cast<std::uint64_t>(ways) * line_size); }

  friend bool operator==(const CacheLevelSpec&, const CacheLevelSpec&) = default;
};

struct PortModel {
  int vector_bits = 256;
  bool fma = true;
  int fp_ports = 2;
  int load_ports = 2;
  int store_ports = 1;
  int load_width_bits = 256;
  int store_width_bits = 256;
  friend bool operator==(const PortModel&, const PortModel&) = default;
};

struct MemoryBandwidth {
  double per_numa_domain = 0;  // bytes per second
  double per_socket = 0;       // bytes per second
  friend bool operator==(const MemoryBandwidth&, const MemoryBandwidth&) = default;
};

struct MachineModel {
  std::string name;
  double clock_hz = 0;
  int cores_per_socket = 1;
  int cores_per_numa_domain = 1;
  MemoryBandwidth mem_bandwidth;
  std::vector<CacheLevelSpec> cache_levels;
  PortModel ports;
  OverlapPolicy overlap_policy = OverlapPolicy::intel_no_overlap;
  std::string compiler_flags;

  int numa_domains() const { return cores_per_socket / cores_per_numa_domain; }
  const CacheLevelSpec& level(std::string_view name) const;
  /// Throws MachineError describing the first violated invariant.
  void validate() const;

  friend bool operator==(const MachineModel&, const MachineModel&) = default;
};

MachineModel load_machine(const std::filesystem::path& path);
MachineModel parse_machine(std::string_view yaml_text);
std::string serialize_machine(const MachineModel& machine);

/// Cycles to move the given per-cacheline volumes over a level's upstream path.
double cycles_per_cl(const CacheLevelSpec& level, double load_bytes, double store_bytes);

/// Usable capacity assumed by the layer-condition analysis.
double effective_size(const CacheLevelSpec& level, double safety = 0.5);

/// Cycles for `bytes` of memory traffic at the measured per-NUMA-domain bandwidth.
double mem_cycles_per_cl(const MachineModel& machine, double bytes);

}  // namespace sperf
