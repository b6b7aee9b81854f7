#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "stencilperf/machine.hpp"
#include "stencilperf/stencil.hpp"

namespace sperf::testing {

inline std::filesystem::path machine_dir() { return STENCILPERF_MACHINE_DIR; }
inline std::filesystem::path golden_dir() { return STENCILPERF_GOLDEN_DIR; }

inline MachineModel machine(const std::string& name) {
  return load_machine(machine_dir() / (name + ".yml"));
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline StencilSpec make_spec(int dim, int radius, StencilKind kind, Weighting w,
                             CoefficientStorage c = CoefficientStorage::constant,
                             ElementType t = ElementType::float64) {
  StencilSpec s;
  s.dimensions = dim;
  s.radius = radius;
  s.kind = kind;
  s.weighting = w;
  s.coefficients = c;
  s.element_type = t;
  return s;
}

inline StencilSpec star7() {
  return make_spec(3, 1, StencilKind::star, Weighting::homogeneous);
}
inline StencilSpec star19() {
  return make_spec(3, 3, StencilKind::star, Weighting::heterogeneous);
}
inline StencilSpec box27() {
  return make_spec(3, 1, StencilKind::box, Weighting::heterogeneous, CoefficientStorage::variable);
}

// A random valid stencil family small enough for quick tests.
inline StencilSpec random_spec(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(2, 3), radius(1, 3), any4(0, 3), bit(0, 1);
  StencilSpec s;
  s.dimensions = dim(rng);
  s.radius = radius(rng);
  s.kind = bit(rng) ? StencilKind::star : StencilKind::box;
  if (s.kind == StencilKind::box && s.dimensions == 3) s.radius = std::min(s.radius, 2);
  s.weighting = static_cast<Weighting>(any4(rng));
  s.coefficients = bit(rng) ? CoefficientStorage::constant : CoefficientStorage::variable;
  s.element_type = bit(rng) ? ElementType::float64 : ElementType::float32;
  return s;
}

}  // namespace sperf::testing
