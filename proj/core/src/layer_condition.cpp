#include "stencilperf/layer_condition.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

namespace sperf {

std::string_view to_string(Predictor p) {
  switch (p) {
    case Predictor::layer_condition: return "layer_condition";
    case Predictor::simulation: return "simulation";
    case Predictor::measured: return "measured";
  }
  return "?";
}

std::vector<std::string> link_names(const MachineModel& machine) {
  std::vector<std::string> out;
  const auto& lv = machine.cache_levels;
  for (std::size_t i = 0; i < lv.size(); ++i)
    out.push_back(lv[i].name + "-" + (i + 1 < lv.size() ? lv[i + 1].name : std::string("MEM")));
  return out;
}

std::string_view to_string(LcDim d) {
  switch (d) {
    case LcDim::d1: return "1D";
    case LcDim::d2: return "2D";
    case LcDim::d3: return "3D";
  }
  return "?";
}

LcDim ReuseDistance::dim() const {
  if (delta[0] != 0) return LcDim::d3;
  if (delta[1] != 0) return LcDim::d2;
  return LcDim::d1;
}

const LayerCondition& LcAnalysis::condition(std::string_view level, LcDim dim) const {
  for (const auto& c : conditions)
    if (c.level == level && c.dimensionality == dim) return c;
  throw std::out_of_range(fmt::format("no {} layer condition for level {}", to_string(dim), level));
}

std::vector<long> reuse_distances(const std::vector<long>& sorted_offsets) {
  std::vector<long> out;
  for (std::size_t i = 1; i < sorted_offsets.size(); ++i)
    out.push_back(sorted_offsets[i - 1] - sorted_offsets[i]);
  return out;
}

namespace {

// Accesses of the read array, largest offset first. Lexicographic order on
// (dk, dj, di) equals numeric order whenever every axis exceeds 2r+1.
std::vector<Offset> read_offsets_desc(const KernelIR& kernel) {
  std::vector<Offset> v;
  for (const auto& t : kernel.terms)
    if (t.array == kernel.read_array) v.push_back(t.offset);
  std::sort(v.begin(), v.end(), std::greater<>());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

struct Poly {
  double a = 0, b = 0, c = 0;  // a*N*P + b*P + c, in elements
};

Poly requirement_poly(const KernelIR& kernel, LcDim dim) {
  Poly p;
  for (const auto& d : symbolic_reuse_distances(kernel)) {
    if (static_cast<int>(d.dim()) > static_cast<int>(dim)) continue;
    p.a += d.delta[0];
    p.b += d.delta[1];
    p.c += d.delta[2];
  }
  return p;
}

double requirement_bytes(const KernelIR& kernel, const Poly& p, double N, double P,
                         unsigned line_size) {
  const double eb = static_cast<double>(kernel.spec.element_bytes());
  return eb * (p.a * N * P + p.b * P + p.c) +
         static_cast<double>(kernel.op_counts.distinct_streams) * line_size;
}

constexpr LcDim kDims[] = {LcDim::d1, LcDim::d2, LcDim::d3};

}  // namespace

std::vector<ReuseDistance> symbolic_reuse_distances(const KernelIR& kernel) {
  const auto offs = read_offsets_desc(kernel);
  std::vector<ReuseDistance> out;
  for (std::size_t i = 1; i < offs.size(); ++i) {
    ReuseDistance d;
    for (int a = 0; a < 3; ++a) d.delta[a] = offs[i - 1][a] - offs[i][a];
    out.push_back(d);
  }
  return out;
}

double lc_requirement(const KernelIR& kernel, LcDim dim, long N, long P, unsigned line_size) {
  return requirement_bytes(kernel, requirement_poly(kernel, dim), static_cast<double>(N),
                           static_cast<double>(P), line_size);
}

std::optional<long> lc_break_size(const KernelIR& kernel, const MachineModel& machine,
                                  std::string_view level, LcDim dim, double safety) {
  const auto& lv = machine.level(level);
  const double eff = effective_size(lv, safety);
  const Poly p = requirement_poly(kernel, dim);
  const long n_min = 2L * kernel.spec.radius + 2;
  auto holds = [&](long n) {
    return requirement_bytes(kernel, p, static_cast<double>(n), static_cast<double>(n),
                             lv.line_size) <= eff;
  };
  if (p.a == 0 && p.b == 0) {
    if (holds(n_min)) return std::nullopt;
    return n_min;
  }
  // Positive root of eb*(a n^2 + b n + c) + streams*line = eff.
  const double eb = static_cast<double>(kernel.spec.element_bytes());
  const double c = p.c + (static_cast<double>(kernel.op_counts.distinct_streams) * lv.line_size -
                          eff) / eb;
  double root;
  if (p.a == 0) {
    root = -c / p.b;
  } else {
    const double disc = p.b * p.b - 4 * p.a * c;
    root = disc < 0 ? 0.0 : (-p.b + std::sqrt(disc)) / (2 * p.a);
  }
  long n = std::max(n_min, static_cast<long>(std::floor(root)) - 2);
  while (n > n_min && !holds(n - 1)) --n;
  while (holds(n)) ++n;
  return n;
}

std::optional<long> lc_block_size(const KernelIR& kernel, const MachineModel& machine,
                                  std::string_view level, long P, double safety) {
  const auto& lv = machine.level(level);
  const double eff = effective_size(lv, safety);
  const Poly p = requirement_poly(kernel, LcDim::d3);
  auto holds = [&](long B) {
    return requirement_bytes(kernel, p, static_cast<double>(B), static_cast<double>(P),
                             lv.line_size) <= eff;
  };
  if (!holds(1)) return std::nullopt;
  if (p.a <= 0) return std::nullopt;
  const double eb = static_cast<double>(kernel.spec.element_bytes());
  const double free_elems =
      (eff - static_cast<double>(kernel.op_counts.distinct_streams) * lv.line_size) / eb -
      p.b * static_cast<double>(P) - p.c;
  long B = std::max(1L, static_cast<long>(std::floor(free_elems / (p.a * static_cast<double>(P)))));
  while (B > 1 && !holds(B)) --B;
  while (holds(B + 1)) ++B;
  return B;
}

LcAnalysis layer_conditions(const KernelIR& kernel, const MachineModel& machine,
                            const GridDims& dims, double safety) {
  dims.validate(kernel.spec);
  LcAnalysis out;
  const auto distances = symbolic_reuse_distances(kernel);
  const auto names = link_names(machine);
  const auto& levels = machine.cache_levels;

  // Lines per cacheline of work that each level has to fetch from below.
  std::vector<double> load_lines(levels.size(), 0.0);
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const auto& lv = levels[li];
    const double eff = effective_size(lv, safety);
    bool ok[4] = {true, false, false, false};
    for (const LcDim d : kDims) {
      LayerCondition c;
      c.level = lv.name;
      c.dimensionality = d;
      c.requirement_bytes = lc_requirement(kernel, d, dims.N, dims.P, lv.line_size);
      c.effective_bytes = eff;
      c.holds = c.requirement_bytes <= eff;
      c.break_size = lc_break_size(kernel, machine, lv.name, d, safety);
      ok[static_cast<int>(d)] = c.holds;
      out.conditions.push_back(c);
    }
    double misses = 1.0;  // leading access of the read array
    for (const auto& d : distances)
      if (!ok[static_cast<int>(d.dim())]) misses += 1.0;
    misses += static_cast<double>(kernel.weight_components());
    if (lv.write_allocate) misses += 1.0;
    load_lines[li] = misses;
  }

  auto& t = out.traffic;
  t.predictor = Predictor::layer_condition;
  t.reg_loads = kernel.op_counts.loads;
  t.reg_stores = kernel.op_counts.stores;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double line = levels[li].line_size;
    LinkTraffic link{names[li], load_lines[li] * line, line};
    const bool next_is_victim = li + 1 < levels.size() && levels[li + 1].victim;
    if (next_is_victim) {
      // Lines come from the victim level only when it still holds them; every
      // fill of this level is written to the victim level on eviction.
      link.load_bytes = std::max(0.0, load_lines[li] - load_lines[li + 1]) * line;
      link.store_bytes = load_lines[li] * line;
    }
    t.links.push_back(link);
  }
  return out;
}

}  // namespace sperf
