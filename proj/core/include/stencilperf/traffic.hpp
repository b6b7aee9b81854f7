#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "stencilperf/machine.hpp"
#include "stencilperf/stencil.hpp"

namespace sperf {

enum class Predictor { layer_condition, simulation, measured };
std::string_view to_string(Predictor p);

/// Volume crossing the boundary below one cache level, in bytes per cacheline
/// of work. `load_bytes` flows toward the core, `store_bytes` away from it.
struct LinkTraffic {
  std::string name;  // e.g. "L1-L2", "L3-MEM"
  double load_bytes = 0;
  double store_bytes = 0;
  friend bool operator==(const LinkTraffic&, const LinkTraffic&) = default;
};

struct TrafficPrediction {
  Predictor predictor = Predictor::layer_condition;
  /// One entry per cache level: links[i] joins cache_levels[i] with the next
  /// level, the last one joins the last level with main memory.
  std::vector<LinkTraffic> links;
  /// Register <-> L1 element accesses per lattice update.
  double reg_loads = 0;
  double reg_stores = 0;

  const LinkTraffic& link(std::size_t level_index) const { return links.at(level_index); }
};

/// Link names for a machine: "L1-L2", "L2-L3", "L3-MEM".
std::vector<std::string> link_names(const MachineModel& machine);

/// Lattice updates per cacheline of work.
inline double lups_per_cl(unsigned line_size, std::size_t element_bytes) {
  return static_cast<double>(line_size) / static_cast<double>(element_bytes);
}

}  // namespace sperf
