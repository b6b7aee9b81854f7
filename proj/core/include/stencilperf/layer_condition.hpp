#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stencilperf/machine.hpp"
#include "stencilperf/stencil.hpp"
#include "stencilperf/traffic.hpp"

namespace sperf {

/// Scaling class of a reuse distance: O(1), O(P) or O(N*P) elements.
enum class LcDim { d1 = 1, d2 = 2, d3 = 3 };
std::string_view to_string(LcDim d);

/// Difference between two consecutive accesses of one array, kept symbolic
/// so it can be re-evaluated for any grid shape.
struct ReuseDistance {
  Offset delta{};  // (dk, dj, di)

  LcDim dim() const;
  long elements(long N, long P) const { return delta[0] * N * P + delta[1] * P + delta[2]; }
  friend bool operator==(const ReuseDistance&, const ReuseDistance&) = default;
};

struct LayerCondition {
  std::string level;
  LcDim dimensionality = LcDim::d3;
  double requirement_bytes = 0;  // at the analyzed dims
  double effective_bytes = 0;
  bool holds = false;
  /// Smallest cubic edge at which the condition fails; empty if it never does.
  std::optional<long> break_size;
};

struct LcAnalysis {
  std::vector<LayerCondition> conditions;  // level-major, 1D..3D
  TrafficPrediction traffic;

  const LayerCondition& condition(std::string_view level, LcDim dim) const;
};

/// Consecutive differences of an offset list sorted in descending order.
std::vector<long> reuse_distances(const std::vector<long>& sorted_offsets);

/// Symbolic reuse distances of all arrays of the kernel, in access order per
/// array (largest offset first).
std::vector<ReuseDistance> symbolic_reuse_distances(const KernelIR& kernel);

/// Bytes the given reuse class needs to stay resident at extents (N, P).
double lc_requirement(const KernelIR& kernel, LcDim dim, long N, long P, unsigned line_size);

LcAnalysis layer_conditions(const KernelIR& kernel, const MachineModel& machine,
                            const GridDims& dims, double safety = 0.5);

/// Smallest cubic N at which the condition of `dim` fails at `level`.
std::optional<long> lc_break_size(const KernelIR& kernel, const MachineModel& machine,
                                  std::string_view level, LcDim dim, double safety = 0.5);

/// Largest middle-loop block B for which the 3D condition of `level` holds on
/// a grid of inner extent P. Empty if even the smallest block does not fit.
std::optional<long> lc_block_size(const KernelIR& kernel, const MachineModel& machine,
                                  std::string_view level, long P, double safety = 0.5);

}  // namespace sperf
