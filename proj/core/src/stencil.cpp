#include "stencilperf/stencil.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <tuple>
#include <utility>

#include <fmt/format.h>

namespace sperf {

std::string_view to_string(StencilKind v) {
  return v == StencilKind::star ? "star" : "box";
}

std::string_view to_string(Weighting v) {
  switch (v) {
    case Weighting::homogeneous: return "homogeneous";
    case Weighting::heterogeneous: return "heterogeneous";
    case Weighting::isotropic: return "isotropic";
    case Weighting::point_symmetric: return "point-symmetric";
  }
  return "?";
}

std::string_view to_string(CoefficientStorage v) {
  return v == CoefficientStorage::constant ? "constant" : "variable";
}

std::string_view to_string(ElementType v) {
  return v == ElementType::float32 ? "float32" : "float64";
}

StencilKind parse_kind(std::string_view s) {
  if (s == "star") return StencilKind::star;
  if (s == "box") return StencilKind::box;
  throw SpecError(fmt::format("unknown stencil kind '{}' (expected star|box)", s));
}

Weighting parse_weighting(std::string_view s) {
  if (s == "homogeneous" || s == "homo") return Weighting::homogeneous;
  if (s == "heterogeneous" || s == "hetero") return Weighting::heterogeneous;
  if (s == "isotropic" || s == "iso") return Weighting::isotropic;
  if (s == "point-symmetric" || s == "point_symmetric" || s == "point")
    return Weighting::point_symmetric;
  throw SpecError(fmt::format(
      "unknown weighting '{}' (expected homogeneous|heterogeneous|isotropic|point-symmetric)", s));
}

CoefficientStorage parse_storage(std::string_view s) {
  if (s == "constant" || s == "const") return CoefficientStorage::constant;
  if (s == "variable" || s == "var") return CoefficientStorage::variable;
  throw SpecError(fmt::format("unknown coefficient storage '{}' (expected constant|variable)", s));
}

ElementType parse_element_type(std::string_view s) {
  if (s == "float64" || s == "double") return ElementType::float64;
  if (s == "float32" || s == "float") return ElementType::float32;
  throw SpecError(fmt::format("unknown data type '{}' (expected float64|float32)", s));
}

void StencilSpec::validate() const {
  if (dimensions != 2 && dimensions != 3)
    throw SpecError(fmt::format("unsupported dimensions {} (2 or 3)", dimensions));
  if (radius < 1 || radius > kMaxRadius)
    throw SpecError(fmt::format("unsupported radius {} (1..{})", radius, kMaxRadius));
  if (point_count() > kMaxPoints)
    throw SpecError(fmt::format("{}D {} stencil with radius {} has {} points (limit {})",
                                dimensions, to_string(kind), radius, point_count(), kMaxPoints));
}

std::size_t StencilSpec::point_count() const {
  const auto d = static_cast<std::size_t>(dimensions);
  const auto r = static_cast<std::size_t>(radius);
  if (kind == StencilKind::star) return 2 * d * r + 1;
  std::size_t n = 1;
  for (std::size_t i = 0; i < d; ++i) n *= 2 * r + 1;
  return n;
}

std::size_t StencilSpec::element_bytes() const {
  return element_type == ElementType::float64 ? 8 : 4;
}

std::string StencilSpec::name() const {
  return fmt::format("{}D-r{}-{}-{}-{}-{}", dimensions, radius, to_string(kind),
                     to_string(weighting), to_string(coefficients), to_string(element_type));
}

GridDims GridDims::cubic(const StencilSpec& spec, long n) {
  GridDims d;
  d.M = spec.dimensions == 3 ? n : 1;
  d.N = n;
  d.P = n;
  d.element_bytes = spec.element_bytes();
  return d;
}

std::size_t GridDims::interior_points(int radius) const {
  const long h = 2L * radius;
  const long m = M == 1 ? 1 : M - h;
  if (m <= 0 || N - h <= 0 || P - h <= 0) return 0;
  return static_cast<std::size_t>(m * (N - h) * (P - h));
}

void GridDims::validate(const StencilSpec& spec) const {
  const long min_axis = 2L * spec.radius + 2;
  if (element_bytes != spec.element_bytes())
    throw SpecError(fmt::format("grid element size {} B does not match {} ({} B)", element_bytes,
                                to_string(spec.element_type), spec.element_bytes()));
  if (spec.dimensions == 2 && M != 1)
    throw SpecError(fmt::format("2D grids must have M == 1, got M = {}", M));
  if (spec.dimensions == 3 && M < min_axis)
    throw SpecError(fmt::format("grid axis M = {} is below the minimum {} for radius {}", M,
                                min_axis, spec.radius));
  if (N < min_axis || P < min_axis)
    throw SpecError(fmt::format("grid axes N = {}, P = {} must be at least {} for radius {}", N, P,
                                min_axis, spec.radius));
}

namespace {

std::vector<Offset> stencil_offsets(const StencilSpec& spec) {
  const int r = spec.radius;
  const int kr = spec.dimensions == 3 ? r : 0;
  std::vector<Offset> out;
  for (int dk = -kr; dk <= kr; ++dk) {
    for (int dj = -r; dj <= r; ++dj) {
      for (int di = -r; di <= r; ++di) {
        const int nonzero = (dk != 0) + (dj != 0) + (di != 0);
        if (spec.kind == StencilKind::star && nonzero > 1) continue;
        out.push_back({dk, dj, di});
      }
    }
  }
  // Center first, then lexicographic on (di, dj, dk).
  std::sort(out.begin(), out.end(), [](const Offset& x, const Offset& y) {
    const bool xc = x == Offset{0, 0, 0};
    const bool yc = y == Offset{0, 0, 0};
    if (xc != yc) return xc;
    return std::tie(x[2], x[1], x[0]) < std::tie(y[2], y[1], y[0]);
  });
  return out;
}

int squared_norm(const Offset& o) { return o[0] * o[0] + o[1] * o[1] + o[2] * o[2]; }

}  // namespace

KernelIR build_kernel(const StencilSpec& spec) {
  spec.validate();
  KernelIR k;
  k.spec = spec;
  const auto offsets = stencil_offsets(spec);
  const bool variable = spec.coefficients == CoefficientStorage::variable;

  std::vector<std::size_t> coef_of(offsets.size(), 0);
  std::size_t n_coef = 1;
  switch (spec.weighting) {
    case Weighting::homogeneous:
      break;
    case Weighting::heterogeneous:
      for (std::size_t t = 0; t < offsets.size(); ++t) coef_of[t] = t;
      n_coef = offsets.size();
      break;
    case Weighting::isotropic: {
      std::set<int> norms;
      for (const auto& o : offsets) norms.insert(squared_norm(o));
      const std::vector<int> sorted(norms.begin(), norms.end());
      for (std::size_t t = 0; t < offsets.size(); ++t) {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), squared_norm(offsets[t]));
        coef_of[t] = static_cast<std::size_t>(it - sorted.begin());
      }
      n_coef = sorted.size();
      break;
    }
    case Weighting::point_symmetric: {
      std::map<Offset, std::size_t> pair_index;
      n_coef = 1;  // center
      for (std::size_t t = 0; t < offsets.size(); ++t) {
        const Offset& o = offsets[t];
        if (o == Offset{0, 0, 0}) continue;
        const Offset neg{-o[0], -o[1], -o[2]};
        if (auto it = pair_index.find(neg); it != pair_index.end()) {
          coef_of[t] = it->second;
        } else {
          pair_index[o] = n_coef;
          coef_of[t] = n_coef++;
        }
      }
      break;
    }
  }

  for (std::size_t c = 0; c < n_coef; ++c) {
    k.coefficients.push_back(variable ? fmt::format("{}[{}]", k.weight_array, c)
                                      : fmt::format("c{}", c));
  }
  for (std::size_t t = 0; t < offsets.size(); ++t) {
    k.terms.push_back({k.read_array, offsets[t], CoefficientRef{coef_of[t]}});
  }
  k.op_counts = count_ops(k);
  return k;
}

OpCounts count_ops(const KernelIR& kernel) {
  OpCounts c;
  const int terms = static_cast<int>(kernel.terms.size());
  const bool homogeneous = kernel.spec.weighting == Weighting::homogeneous;
  c.adds = terms - 1;
  c.muls = homogeneous ? 1 : terms;
  c.stores = 1;
  c.loads = terms + static_cast<int>(kernel.weight_components());

  std::set<std::pair<std::string, std::pair<int, int>>> streams;
  for (const auto& t : kernel.terms) streams.insert({t.array, {t.offset[0], t.offset[1]}});
  c.distinct_streams = static_cast<int>(streams.size() + kernel.weight_components()) + 1;
  return c;
}

std::vector<std::string> kernel_arrays(const KernelIR& kernel) {
  std::vector<std::string> out{kernel.read_array};
  for (std::size_t c = 0; c < kernel.weight_components(); ++c) out.push_back(kernel.coefficients[c]);
  out.push_back(kernel.write_array);
  return out;
}

std::map<std::string, std::vector<long>> linearized_offsets(const KernelIR& kernel,
                                                            const GridDims& dims) {
  const auto s = dims.strides();
  std::map<std::string, std::vector<long>> out;
  auto& reads = out[kernel.read_array];
  for (const auto& t : kernel.terms)
    reads.push_back(t.offset[0] * s[0] + t.offset[1] * s[1] + t.offset[2] * s[2]);
  std::sort(reads.begin(), reads.end(), std::greater<>());
  for (std::size_t c = 0; c < kernel.weight_components(); ++c) out[kernel.coefficients[c]] = {0};
  out[kernel.write_array] = {0};
  return out;
}

}  // namespace sperf
