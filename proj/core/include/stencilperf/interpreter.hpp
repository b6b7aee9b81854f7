#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stencilperf/codegen.hpp"
#include "stencilperf/stencil.hpp"

namespace sperf {

/// Dense row-major grid of extents (M, N, P).
template <typename T>
class Grid {
 public:
  Grid() = default;
  explicit Grid(const GridDims& dims, T fill = T{})
      : dims_(dims), data_(dims.points(), fill) {}

  const GridDims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(long k, long j, long i) { return data_[index(k, j, i)]; }
  const T& operator()(long k, long j, long i) const { return data_[index(k, j, i)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(long k, long j, long i) const {
    return static_cast<std::size_t>((k * dims_.N + j) * dims_.P + i);
  }

  GridDims dims_;
  std::vector<T> data_;
};

template <typename T>
struct KernelInputs {
  Grid<T> input;
  std::vector<T> scalars;        // constant coefficients, one per KernelIR coefficient
  std::vector<Grid<T>> weights;  // variable coefficients, one grid per component
};

/// Traversal order for one sweep; the blocked form mirrors the emitted C.
struct Traversal {
  std::optional<BlockSpec> block;
};

/// Same hash-based initialization as the generated benchmark harness, so the
/// checksums of both agree for equal seeds.
template <typename T>
KernelInputs<T> make_inputs(const KernelIR& kernel, const GridDims& dims, std::uint64_t seed);

/// One Jacobi sweep. Points within `radius` of the boundary are copied from
/// the input unchanged. Throws SpecError on shape or type mismatches.
template <typename T>
Grid<T> interpret(const KernelIR& kernel, const GridDims& dims, const KernelInputs<T>& inputs,
                  const Traversal& traversal = {});

/// Sum of all grid values in linear order, accumulated in double precision.
template <typename T>
double checksum(const Grid<T>& grid);

/// Value written by the harness for array `array_id` at linear index `idx`.
double harness_init_value(std::uint64_t seed, std::uint64_t array_id, std::uint64_t idx);

extern template KernelInputs<float> make_inputs(const KernelIR&, const GridDims&, std::uint64_t);
extern template KernelInputs<double> make_inputs(const KernelIR&, const GridDims&, std::uint64_t);
extern template Grid<float> interpret(const KernelIR&, const GridDims&, const KernelInputs<float>&,
                                      const Traversal&);
extern template Grid<double> interpret(const KernelIR&, const GridDims&,
                                       const KernelInputs<double>&, const Traversal&);
extern template double checksum(const Grid<float>&);
extern template double checksum(const Grid<double>&);

}  // namespace sperf
