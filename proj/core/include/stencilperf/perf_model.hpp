#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stencilperf/machine.hpp"
#include "stencilperf/stencil.hpp"
#include "stencilperf/traffic.hpp"

namespace sperf {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct InCoreOptions {
  /// Count load and store instructions on one shared budget instead of
  /// taking the slower of the two port groups.
  bool serialize_load_store = false;
};

struct InCorePrediction {
  double T_comp = 0;   // cycles per cacheline
  double T_RegL1 = 0;  // cycles per cacheline
  int lanes = 1;
  double vec_iters_per_cl = 0;
  int fp_instructions = 0;  // per vector iteration
  int load_uops = 0;        // per vector iteration
  int store_uops = 0;       // per vector iteration
};

/// Analytic port model: ideal vectorization, no loop-carried dependencies.
InCorePrediction incore(const KernelIR& kernel, const MachineModel& machine,
                        const InCoreOptions& options = {});

/// ECM terms in cycles per cacheline. Absent terms are unknown, not zero.
struct EcmTerms {
  std::optional<double> T_comp, T_RegL1, T_L1L2, T_L2L3, T_L3MEM;
};

struct EcmPrediction {
  EcmTerms terms;
  double T_total = 0;
  OverlapPolicy policy = OverlapPolicy::intel_no_overlap;
  /// Set when a term was absent: T_total then only bounds the runtime from below.
  bool lower_bound = false;

  double T_comp() const { return terms.T_comp.value_or(0); }
  double T_RegL1() const { return terms.T_RegL1.value_or(0); }
  double T_L1L2() const { return terms.T_L1L2.value_or(0); }
  double T_L2L3() const { return terms.T_L2L3.value_or(0); }
  double T_L3MEM() const { return terms.T_L3MEM.value_or(0); }
};

EcmPrediction compose_ecm(const EcmTerms& terms, OverlapPolicy policy);

/// Transfer terms from a traffic prediction on a three-level machine.
EcmTerms transfer_terms(const TrafficPrediction& traffic, const MachineModel& machine);

/// In-core terms plus transfer terms, composed under the machine's policy.
EcmPrediction ecm(const KernelIR& kernel, const MachineModel& machine,
                  const TrafficPrediction& traffic, const InCoreOptions& options = {});

struct RooflinePrediction {
  std::string bottleneck;  // "compute", or the level whose bandwidth limits
  double cycles_per_cl = 0;
  double performance = 0;  // lattice updates per second
  std::vector<std::pair<std::string, double>> candidates;
};

RooflinePrediction roofline(const TrafficPrediction& traffic, const MachineModel& machine,
                            double T_comp, std::size_t element_bytes);

/// Lattice updates per second at the machine clock.
double cycles_to_lups(double cycles_per_cl, const MachineModel& machine,
                      std::size_t element_bytes);
double lups_to_cycles(double lups, const MachineModel& machine, std::size_t element_bytes);
double cycles_to_lups(double cycles_per_cl, double clock_hz, double lups_per_cl);
double lups_to_cycles(double lups, double clock_hz, double lups_per_cl);

struct ScalingPoint {
  int cores = 0;
  double cycles_per_cl = 0;  // aggregate over all active cores
  double performance = 0;    // lattice updates per second
};

struct ScalingPrediction {
  std::vector<ScalingPoint> points;
  /// Cores per NUMA domain at which memory bandwidth saturates; empty if never.
  std::optional<int> saturation_cores;
};

/// Linear scaling until the memory term saturates each NUMA domain. Cores fill
/// one domain completely before the next one.
ScalingPrediction scale_cores(const EcmPrediction& ecm, const MachineModel& machine,
                              std::size_t element_bytes, int max_cores);

/// Measured per-cacheline quantities for one run.
struct MeasurementRecord {
  std::optional<long> N;
  std::optional<double> l1l2_load_bytes, l1l2_store_bytes;
  std::optional<double> l2l3_load_bytes, l2l3_store_bytes;
  std::optional<double> mem_load_bytes, mem_store_bytes;
  /// Executed µops per cacheline of work, keyed by port ("fp0", "load1", "store0", ...).
  std::map<std::string, double> port_uops;
  std::optional<double> runtime_cycles_per_cl;
  std::string provenance;

  bool empty() const;
};

EcmPrediction phenomenological_ecm(const MeasurementRecord& record, const MachineModel& machine);

}  // namespace sperf
