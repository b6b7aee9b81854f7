#include "stencilperf/interpreter.hpp"

#include <algorithm>
#include <type_traits>

#include <fmt/format.h>

namespace sperf {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <typename T>
constexpr ElementType element_type_of() {
  return std::is_same_v<T, double> ? ElementType::float64 : ElementType::float32;
}

struct Bounds {
  long k0, k1, j0, j1, i0, i1;
};

}  // namespace

double harness_init_value(std::uint64_t seed, std::uint64_t array_id, std::uint64_t idx) {
  const std::uint64_t h = mix64(seed ^ (array_id << 56) ^ mix64(idx));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

template <typename T>
KernelInputs<T> make_inputs(const KernelIR& kernel, const GridDims& dims, std::uint64_t seed) {
  if (kernel.spec.element_type != element_type_of<T>())
    throw SpecError("element type of the requested inputs does not match the kernel");
  dims.validate(kernel.spec);
  KernelInputs<T> in;
  in.input = Grid<T>(dims);
  for (std::size_t n = 0; n < in.input.size(); ++n)
    in.input.data()[n] = static_cast<T>(harness_init_value(seed, 0, n));
  if (kernel.variable_coefficients()) {
    for (std::size_t c = 0; c < kernel.weight_components(); ++c) {
      Grid<T> w(dims);
      for (std::size_t n = 0; n < w.size(); ++n)
        w.data()[n] = static_cast<T>(harness_init_value(seed, 2 + c, n));
      in.weights.push_back(std::move(w));
    }
  } else {
    for (std::size_t c = 0; c < kernel.coefficients.size(); ++c)
      in.scalars.push_back(static_cast<T>(1.0 / static_cast<double>(c + 2)));
  }
  return in;
}

template <typename T>
Grid<T> interpret(const KernelIR& kernel, const GridDims& dims, const KernelInputs<T>& in,
                  const Traversal& traversal) {
  if (kernel.spec.element_type != element_type_of<T>())
    throw SpecError("element type of the inputs does not match the kernel");
  dims.validate(kernel.spec);
  if (!(in.input.dims() == dims))
    throw SpecError(fmt::format("input grid is {}x{}x{}, expected {}x{}x{}", in.input.dims().M,
                                in.input.dims().N, in.input.dims().P, dims.M, dims.N, dims.P));
  if (kernel.variable_coefficients()) {
    if (in.weights.size() != kernel.weight_components())
      throw SpecError(fmt::format("kernel needs {} weight grids, got {}",
                                  kernel.weight_components(), in.weights.size()));
    for (const auto& w : in.weights)
      if (!(w.dims() == dims)) throw SpecError("weight grid shape does not match the input grid");
  } else if (in.scalars.size() != kernel.coefficients.size()) {
    throw SpecError(fmt::format("kernel needs {} coefficients, got {}",
                                kernel.coefficients.size(), in.scalars.size()));
  }
  if (traversal.block && traversal.block->size < 1)
    throw SpecError("block size must be at least 1");

  Grid<T> out = in.input;  // boundary ring stays as in the input
  const long r = kernel.spec.radius;
  const bool three_d = kernel.spec.dimensions == 3;
  const long stride_k = dims.N * dims.P;
  const long stride_j = dims.P;

  std::vector<long> rel;
  std::vector<std::size_t> coef;
  for (const auto& t : kernel.terms) {
    rel.push_back(t.offset[0] * stride_k + t.offset[1] * stride_j + t.offset[2]);
    coef.push_back(t.coefficient.index);
  }
  const bool homogeneous = kernel.spec.weighting == Weighting::homogeneous;
  const bool variable = kernel.variable_coefficients();
  const T* src = in.input.data().data();
  T* dst = out.data().data();

  // Evaluation order matches the emitted C expression term by term.
  auto update = [&](long k, long j, long i) {
    const long c = (k * dims.N + j) * dims.P + i;
    if (homogeneous) {
      T sum = src[c + rel[0]];
      for (std::size_t t = 1; t < rel.size(); ++t) sum = sum + src[c + rel[t]];
      const T scale = variable ? in.weights[0].data()[c] : in.scalars[0];
      dst[c] = scale * sum;
      return;
    }
    auto weight = [&](std::size_t t) {
      return variable ? in.weights[coef[t]].data()[c] : in.scalars[coef[t]];
    };
    T acc = weight(0) * src[c + rel[0]];
    for (std::size_t t = 1; t < rel.size(); ++t) acc = acc + weight(t) * src[c + rel[t]];
    dst[c] = acc;
  };

  const Bounds b{three_d ? r : 0, three_d ? dims.M - r : 1, r, dims.N - r, r, dims.P - r};
  if (!traversal.block) {
    for (long k = b.k0; k < b.k1; ++k)
      for (long j = b.j0; j < b.j1; ++j)
        for (long i = b.i0; i < b.i1; ++i) update(k, j, i);
  } else {
    const long bs = traversal.block->size;
    for (long jb = b.j0; jb < b.j1; jb += bs) {
      const long jend = std::min(jb + bs, b.j1);
      for (long k = b.k0; k < b.k1; ++k)
        for (long j = jb; j < jend; ++j)
          for (long i = b.i0; i < b.i1; ++i) update(k, j, i);
    }
  }
  return out;
}

template <typename T>
double checksum(const Grid<T>& grid) {
  double sum = 0.0;
  for (const T v : grid.data()) sum += static_cast<double>(v);
  return sum;
}

template KernelInputs<float> make_inputs(const KernelIR&, const GridDims&, std::uint64_t);
template KernelInputs<double> make_inputs(const KernelIR&, const GridDims&, std::uint64_t);
template Grid<float> interpret(const KernelIR&, const GridDims&, const KernelInputs<float>&,
                               const Traversal&);
template Grid<double> interpret(const KernelIR&, const GridDims&, const KernelInputs<double>&,
                                const Traversal&);
template double checksum(const Grid<float>&);
template double checksum(const Grid<double>&);

}  // namespace sperf
