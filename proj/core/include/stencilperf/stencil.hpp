#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sperf {

/// Raised for stencil classifications or grid shapes the toolkit cannot handle.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class StencilKind { star, box };
enum class Weighting { homogeneous, heterogeneous, isotropic, point_symmetric };
enum class CoefficientStorage { constant, variable };
enum class ElementType { float32, float64 };

std::string_view to_string(StencilKind v);
std::string_view to_string(Weighting v);
std::string_view to_string(CoefficientStorage v);
std::string_view to_string(ElementType v);

// Parsers accept the canonical names above plus the short forms used on the
// command line (homo, hetero, iso, point-symmetric, const, var, float, double).
StencilKind parse_kind(std::string_view s);
Weighting parse_weighting(std::string_view s);
CoefficientStorage parse_storage(std::string_view s);
ElementType parse_element_type(std::string_view s);

inline constexpr int kMaxRadius = 8;
inline constexpr std::size_t kMaxPoints = 1000;

/// The six classification parameters that define a stencil family.
struct StencilSpec {
  int dimensions = 3;
  int radius = 1;
  StencilKind kind = StencilKind::star;
  Weighting weighting = Weighting::homogeneous;
  CoefficientStorage coefficients = CoefficientStorage::constant;
  ElementType element_type = ElementType::float64;

  /// Throws SpecError on an unsupported combination.
  void validate() const;
  std::size_t point_count() const;
  std::size_t element_bytes() const;
  /// Stable identifier, e.g. "3D-r1-star-homogeneous-constant-float64".
  std::string name() const;

  friend bool operator==(const StencilSpec&, const StencilSpec&) = default;
};

/// Grid extents, outer to inner. Two-dimensional grids use M == 1.
struct GridDims {
  long M = 1;
  long N = 1;
  long P = 1;
  std::size_t element_bytes = 8;

  static GridDims cubic(const StencilSpec& spec, long n);

  std::size_t points() const { return static_cast<std::size_t>(M * N * P); }
  std::size_t bytes() const { return points() * element_bytes; }
  std::array<long, 3> strides() const { return {N * P, P, 1}; }
  /// Number of points updated by one sweep (everything outside the halo).
  std::size_t interior_points(int radius) const;
  /// Throws SpecError unless every used axis holds at least one interior point.
  void validate(const StencilSpec& spec) const;

  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Relative offset (dk, dj, di); dk is always zero for 2D stencils.
using Offset = std::array<int, 3>;

struct CoefficientRef {
  std::size_t index = 0;  // into KernelIR::coefficients
  friend bool operator==(const CoefficientRef&, const CoefficientRef&) = default;
};

struct OffsetTerm {
  std::string array;
  Offset offset{};
  CoefficientRef coefficient;
  friend bool operator==(const OffsetTerm&, const OffsetTerm&) = default;
};

struct OpCounts {
  int adds = 0;
  int muls = 0;
  int loads = 0;
  int stores = 0;
  int distinct_streams = 0;
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

/// A Jacobi-form stencil update: write_array[x] = f(read_array[x + o] ...).
///
/// Coefficients are either scalars ("c0", "c1", ...) or components of a single
/// weight grid ("W[0]", "W[1]", ...) when the coefficient storage is variable.
/// Terms are ordered with the center first, then lexicographically on the
/// offset read innermost axis first (di, dj, dk).
struct KernelIR {
  StencilSpec spec;
  std::string read_array = "a";
  std::string write_array = "b";
  std::string weight_array = "W";
  std::vector<OffsetTerm> terms;
  std::vector<std::string> coefficients;
  OpCounts op_counts;

  bool variable_coefficients() const {
    return spec.coefficients == CoefficientStorage::variable;
  }
  /// Number of weight grid components (0 for constant coefficients).
  std::size_t weight_components() const {
    return variable_coefficients() ? coefficients.size() : 0;
  }
};

KernelIR build_kernel(const StencilSpec& spec);
OpCounts count_ops(const KernelIR& kernel);

/// Linearized element offsets per array, sorted descending. Each weight grid
/// component is reported as its own array ("W[3]").
std::map<std::string, std::vector<long>> linearized_offsets(const KernelIR& kernel,
                                                            const GridDims& dims);

/// Arrays touched by the kernel in first-use order: read array, weight
/// components, write array.
std::vector<std::string> kernel_arrays(const KernelIR& kernel);

}  // namespace sperf
