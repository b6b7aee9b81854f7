#include "stencilperf/perf_model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace sperf {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

void require_three_levels(const MachineModel& machine) {
  if (machine.cache_levels.size() != 3)
    throw ModelError(fmt::format("ECM needs three cache levels, machine '{}' has {}", machine.name,
                                 machine.cache_levels.size()));
}

}  // namespace

InCorePrediction incore(const KernelIR& kernel, const MachineModel& machine,
                        const InCoreOptions& options) {
  const auto& p = machine.ports;
  const int element_bits = static_cast<int>(kernel.spec.element_bytes() * 8);
  if (p.vector_bits < element_bits)
    throw ModelError(fmt::format("vector width {} bits is narrower than the {}-bit element type",
                                 p.vector_bits, element_bits));
  InCorePrediction r;
  r.lanes = p.vector_bits / element_bits;
  const unsigned line = machine.cache_levels.front().line_size;
  r.vec_iters_per_cl = lups_per_cl(line, kernel.spec.element_bytes()) / r.lanes;

  const auto& ops = kernel.op_counts;
  const bool fuse = p.fma && kernel.spec.weighting != Weighting::homogeneous;
  const int fused = fuse ? std::min(ops.adds, ops.muls) : 0;
  r.fp_instructions = ops.adds + ops.muls - fused;
  r.load_uops = ops.loads * ceil_div(p.vector_bits, p.load_width_bits);
  r.store_uops = ops.stores * ceil_div(p.vector_bits, p.store_width_bits);

  if (r.fp_instructions > 0 && p.fp_ports == 0)
    throw ModelError("kernel has floating-point work but the machine has no fp ports");
  r.T_comp = r.fp_instructions == 0
                 ? 0.0
                 : r.vec_iters_per_cl * ceil_div(r.fp_instructions, p.fp_ports);
  const int ld = ceil_div(r.load_uops, p.load_ports);
  const int st = ceil_div(r.store_uops, p.store_ports);
  r.T_RegL1 = r.vec_iters_per_cl * (options.serialize_load_store ? ld + st : std::max(ld, st));
  return r;
}

EcmPrediction compose_ecm(const EcmTerms& t, OverlapPolicy policy) {
  for (const auto& v : {t.T_comp, t.T_RegL1, t.T_L1L2, t.T_L2L3, t.T_L3MEM})
    if (v && !(*v >= 0)) throw ModelError(fmt::format("ECM term {} is negative", *v));
  EcmPrediction e;
  e.terms = t;
  e.policy = policy;
  e.lower_bound = !(t.T_comp && t.T_RegL1 && t.T_L1L2 && t.T_L2L3 && t.T_L3MEM);
  if (policy == OverlapPolicy::intel_no_overlap) {
    e.T_total = std::max(e.T_comp(), e.T_RegL1() + e.T_L1L2() + e.T_L2L3() + e.T_L3MEM());
  } else {
    e.T_total = std::max({e.T_comp(), e.T_RegL1(), e.T_L1L2(), e.T_L2L3() + e.T_L3MEM()});
  }
  return e;
}

EcmTerms transfer_terms(const TrafficPrediction& traffic, const MachineModel& machine) {
  require_three_levels(machine);
  if (traffic.links.size() != 3)
    throw ModelError(fmt::format("traffic prediction has {} links, expected 3", traffic.links.size()));
  const auto& lv = machine.cache_levels;
  const auto& l = traffic.links;
  EcmTerms t;
  t.T_L1L2 = cycles_per_cl(lv[1], l[0].load_bytes, l[0].store_bytes);
  t.T_L2L3 = cycles_per_cl(lv[2], l[1].load_bytes, l[1].store_bytes);
  t.T_L3MEM = mem_cycles_per_cl(machine, l[2].load_bytes + l[2].store_bytes);
  return t;
}

EcmPrediction ecm(const KernelIR& kernel, const MachineModel& machine,
                  const TrafficPrediction& traffic, const InCoreOptions& options) {
  auto t = transfer_terms(traffic, machine);
  const auto ic = incore(kernel, machine, options);
  t.T_comp = ic.T_comp;
  t.T_RegL1 = ic.T_RegL1;
  return compose_ecm(t, machine.overlap_policy);
}

RooflinePrediction roofline(const TrafficPrediction& traffic, const MachineModel& machine,
                            double T_comp, std::size_t element_bytes) {
  const auto t = transfer_terms(traffic, machine);
  RooflinePrediction r;
  r.candidates = {{"compute", T_comp},
                  {machine.cache_levels[1].name, *t.T_L1L2},
                  {machine.cache_levels[2].name, *t.T_L2L3},
                  {"MEM", *t.T_L3MEM}};
  r.bottleneck = "compute";
  r.cycles_per_cl = T_comp;
  for (const auto& [name, cy] : r.candidates) {
    if (cy > 0 && cy >= r.cycles_per_cl) {
      r.cycles_per_cl = cy;
      r.bottleneck = name;
    }
  }
  r.performance = r.cycles_per_cl > 0 ? cycles_to_lups(r.cycles_per_cl, machine, element_bytes) : 0;
  return r;
}

double cycles_to_lups(double cycles_per_cl, double clock_hz, double lups_per_cl) {
  if (!(cycles_per_cl > 0) || !std::isfinite(cycles_per_cl))
    throw ModelError(fmt::format("cycles per cacheline must be positive, got {}", cycles_per_cl));
  return clock_hz * lups_per_cl / cycles_per_cl;
}

double lups_to_cycles(double lups, double clock_hz, double lups_per_cl) {
  if (!(lups > 0) || !std::isfinite(lups))
    throw ModelError(fmt::format("performance must be positive, got {}", lups));
  return clock_hz * lups_per_cl / lups;
}

double cycles_to_lups(double cycles_per_cl, const MachineModel& machine,
                      std::size_t element_bytes) {
  return cycles_to_lups(cycles_per_cl, machine.clock_hz,
                        lups_per_cl(machine.cache_levels.front().line_size, element_bytes));
}

double lups_to_cycles(double lups, const MachineModel& machine, std::size_t element_bytes) {
  return lups_to_cycles(lups, machine.clock_hz,
                        lups_per_cl(machine.cache_levels.front().line_size, element_bytes));
}

ScalingPrediction scale_cores(const EcmPrediction& e, const MachineModel& machine,
                              std::size_t element_bytes, int max_cores) {
  if (max_cores < 1 || max_cores > machine.cores_per_socket)
    throw ModelError(fmt::format("core count {} outside 1..{}", max_cores,
                                 machine.cores_per_socket));
  if (!(e.T_total > 0)) throw ModelError("cannot scale a prediction with zero runtime");
  ScalingPrediction s;
  const double p1 = cycles_to_lups(e.T_total, machine, element_bytes);
  const double mem = e.T_L3MEM();
  std::optional<double> p_sat;
  if (mem > 0) {
    p_sat = cycles_to_lups(mem, machine, element_bytes);
    s.saturation_cores = static_cast<int>(std::ceil(e.T_total / mem - 1e-12));
  }
  const int per_domain = machine.cores_per_numa_domain;
  for (int n = 1; n <= max_cores; ++n) {
    double perf = 0;
    for (int left = n; left > 0; left -= per_domain) {
      const double domain = std::min(left, per_domain) * p1;
      perf += p_sat ? std::min(domain, *p_sat) : domain;
    }
    s.points.push_back({n, lups_to_cycles(perf, machine, element_bytes), perf});
  }
  return s;
}

bool MeasurementRecord::empty() const {
  return !l1l2_load_bytes && !l1l2_store_bytes && !l2l3_load_bytes && !l2l3_store_bytes &&
         !mem_load_bytes && !mem_store_bytes && port_uops.empty();
}

EcmPrediction phenomenological_ecm(const MeasurementRecord& r, const MachineModel& machine) {
  require_three_levels(machine);
  if (r.empty()) throw ModelError("measurement record has neither volumes nor port counts");
  EcmTerms t;
  bool partial = false;
  auto link = [&](const std::optional<double>& ld, const std::optional<double>& st,
                  auto&& cycles) -> std::optional<double> {
    if (!ld && !st) return std::nullopt;
    if (!ld || !st) partial = true;
    if (ld.value_or(0) < 0 || st.value_or(0) < 0) throw ModelError("negative measured volume");
    return cycles(ld.value_or(0), st.value_or(0));
  };
  const auto& lv = machine.cache_levels;
  t.T_L1L2 = link(r.l1l2_load_bytes, r.l1l2_store_bytes,
                  [&](double l, double s) { return cycles_per_cl(lv[1], l, s); });
  t.T_L2L3 = link(r.l2l3_load_bytes, r.l2l3_store_bytes,
                  [&](double l, double s) { return cycles_per_cl(lv[2], l, s); });
  t.T_L3MEM = link(r.mem_load_bytes, r.mem_store_bytes,
                   [&](double l, double s) { return mem_cycles_per_cl(machine, l + s); });

  auto port_max = [&](std::initializer_list<std::string_view> prefixes) -> std::optional<double> {
    std::optional<double> m;
    for (const auto& [port, uops] : r.port_uops) {
      for (const auto pre : prefixes) {
        if (port.rfind(pre, 0) == 0) {
          if (uops < 0) throw ModelError(fmt::format("negative µop count for port {}", port));
          m = std::max(m.value_or(0), uops);
        }
      }
    }
    return m;
  };
  t.T_comp = port_max({"fp"});
  t.T_RegL1 = port_max({"load", "store"});
  auto e = compose_ecm(t, machine.overlap_policy);
  e.lower_bound = e.lower_bound || partial;
  return e;
}

}  // namespace sperf
