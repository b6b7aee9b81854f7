#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "stencilperf/interpreter.hpp"
#include "support.hpp"

using namespace sperf;
using namespace sperf::testing;

TEST(Interpreter, HandWrittenStar7) {
  const auto k = build_kernel(star7());
  const GridDims d{6, 7, 8, 8};
  const auto in = make_inputs<double>(k, d, 5);
  const auto out = interpret(k, d, in);
  const auto& a = in.input;
  const double c0 = in.scalars[0];
  for (long z = 0; z < d.M; ++z)
    for (long y = 0; y < d.N; ++y)
      for (long x = 0; x < d.P; ++x) {
        const bool interior = z > 0 && z < d.M - 1 && y > 0 && y < d.N - 1 && x > 0 && x < d.P - 1;
        if (!interior) {
          EXPECT_EQ(out(z, y, x), a(z, y, x));
          continue;
        }
        const double expected =
            c0 * (a(z, y, x) + a(z, y, x - 1) + a(z, y - 1, x) + a(z - 1, y, x) + a(z + 1, y, x) +
                  a(z, y + 1, x) + a(z, y, x + 1));
        EXPECT_EQ(out(z, y, x), expected);
      }
}

TEST(Interpreter, MatchesOrderFreeOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    auto spec = random_spec(rng);
    spec.element_type = ElementType::float64;
    const auto k = build_kernel(spec);
    const auto d = GridDims::cubic(spec, 2 * spec.radius + 4);
    const auto in = make_inputs<double>(k, d, trial);
    const auto out = interpret(k, d, in);
    const long r = spec.radius;
    const long k0 = spec.dimensions == 3 ? r : 0, k1 = spec.dimensions == 3 ? d.M - r : 1;
    for (long z = k0; z < k1; ++z)
      for (long y = r; y < d.N - r; ++y)
        for (long x = r; x < d.P - r; ++x) {
          long double sum = 0;
          for (const auto& t : k.terms) {
            const long double w = k.variable_coefficients()
                                      ? in.weights[t.coefficient.index](z, y, x)
                                      : in.scalars[t.coefficient.index];
            sum += (spec.weighting == Weighting::homogeneous ? 1.0L : w) *
                   in.input(z + t.offset[0], y + t.offset[1], x + t.offset[2]);
          }
          if (spec.weighting == Weighting::homogeneous)
            sum *= k.variable_coefficients() ? in.weights[0](z, y, x) : in.scalars[0];
          EXPECT_NEAR(out(z, y, x), static_cast<double>(sum), 1e-12 * std::fabs(double(sum)) + 1e-15)
              << spec.name();
        }
  }
}

TEST(Interpreter, TraversalInvariance) {
  const auto started = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto spec = random_spec(rng);
    const auto k = build_kernel(spec);
    std::uniform_int_distribution<long> extra(0, 9);
    GridDims d = GridDims::cubic(spec, 2 * spec.radius + 2);
    if (spec.dimensions == 3) d.M += extra(rng);
    d.N += extra(rng);
    d.P += extra(rng);
    std::uniform_int_distribution<long> bs(1, d.N + 2);
    const Traversal blocked{BlockSpec{bs(rng)}};
    if (spec.element_type == ElementType::float64) {
      const auto in = make_inputs<double>(k, d, trial);
      EXPECT_EQ(interpret(k, d, in), interpret(k, d, in, blocked)) << spec.name();
    } else {
      const auto in = make_inputs<float>(k, d, trial);
      EXPECT_EQ(interpret(k, d, in), interpret(k, d, in, blocked)) << spec.name();
    }
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(), 60.0);
}

TEST(Interpreter, InputsAreDeterministic) {
  const auto k = build_kernel(box27());
  const auto d = GridDims::cubic(k.spec, 5);
  const auto a = make_inputs<double>(k, d, 9);
  const auto b = make_inputs<double>(k, d, 9);
  const auto c = make_inputs<double>(k, d, 10);
  EXPECT_EQ(a.input, b.input);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_NE(a.input, c.input);
  EXPECT_EQ(a.weights.size(), 27u);
  for (const double v : a.input.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(checksum(interpret(k, d, a)), checksum(interpret(k, d, b)));
}

TEST(Interpreter, RejectsMismatches) {
  const auto k = build_kernel(star7());
  const auto d = GridDims::cubic(k.spec, 6);
  auto in = make_inputs<double>(k, d, 1);
  EXPECT_THROW(interpret(k, GridDims::cubic(k.spec, 7), in), SpecError);
  EXPECT_THROW(make_inputs<float>(k, d, 1), SpecError);
  in.scalars.clear();
  EXPECT_THROW(interpret(k, d, in), SpecError);
  EXPECT_THROW(interpret(k, GridDims::cubic(k.spec, 3), in), SpecError);
}
