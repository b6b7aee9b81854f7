#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "stencilperf/layer_condition.hpp"
#include "support.hpp"

using namespace sperf;
using namespace sperf::testing;

TEST(ReuseDistance, ConsecutiveDifferences) {
  EXPECT_EQ(reuse_distances({600, 30, 1, 0, -1, -30, -600}),
            (std::vector<long>{570, 29, 1, 1, 29, 570}));
  EXPECT_TRUE(reuse_distances({0}).empty());
}

TEST(ReuseDistance, SymbolicStar7) {
  const auto d = symbolic_reuse_distances(build_kernel(star7()));
  ASSERT_EQ(d.size(), 6u);
  int d3 = 0, d2 = 0, d1 = 0;
  for (const auto& r : d) {
    (r.dim() == LcDim::d3 ? d3 : r.dim() == LcDim::d2 ? d2 : d1)++;
    EXPECT_GT(r.elements(100, 100), 0);
  }
  EXPECT_EQ(d3, 2);
  EXPECT_EQ(d2, 2);
  EXPECT_EQ(d1, 2);
  // Symbolic distances evaluate to the numeric ones.
  const GridDims dims{10, 20, 30, 8};
  const auto numeric = reuse_distances(linearized_offsets(build_kernel(star7()), dims).at("a"));
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d[i].elements(20, 30), numeric[i]);
}

TEST(LayerCondition, HaswellBreaksNearObservedJumps) {
  const auto started = std::chrono::steady_clock::now();
  const auto hsw = machine("hsw");
  const auto k = build_kernel(star7());
  const struct {
    const char* level;
    double observed;
  } anchors[] = {{"L1", 30}, {"L2", 90}, {"L3", 760}};
  for (const auto& a : anchors) {
    const auto n = lc_break_size(k, hsw, a.level, LcDim::d3);
    ASSERT_TRUE(n.has_value()) << a.level;
    EXPECT_LE(std::fabs(*n - a.observed), 0.1 * a.observed) << a.level << " breaks at " << *n;
  }
  EXPECT_EQ(*lc_break_size(k, hsw, "L1", LcDim::d3), 32);
  EXPECT_EQ(*lc_break_size(k, hsw, "L2", LcDim::d3), 91);
  EXPECT_EQ(*lc_break_size(k, hsw, "L3", LcDim::d3), 758);
  EXPECT_FALSE(lc_break_size(k, hsw, "L1", LcDim::d1).has_value());
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(), 1.0);
}

TEST(LayerCondition, Star7TrafficOnHaswell) {
  const auto hsw = machine("hsw");
  const auto k = build_kernel(star7());
  auto at = [&](long n) { return layer_conditions(k, hsw, GridDims::cubic(k.spec, n)).traffic; };
  // Everything fits: leading load, write-allocate and the evicted store.
  for (const auto& l : at(20).links) {
    EXPECT_DOUBLE_EQ(l.load_bytes, 128);
    EXPECT_DOUBLE_EQ(l.store_bytes, 64);
  }
  // L1 and L2 3D conditions broken, L3 still holds.
  const auto t = at(100);
  EXPECT_DOUBLE_EQ(t.link(0).load_bytes, 256);
  EXPECT_DOUBLE_EQ(t.link(1).load_bytes, 256);
  EXPECT_DOUBLE_EQ(t.link(2).load_bytes, 128);
  EXPECT_DOUBLE_EQ(at(1000).link(2).load_bytes, 256);
  EXPECT_DOUBLE_EQ(t.reg_loads, 7);
  EXPECT_DOUBLE_EQ(t.reg_stores, 1);
}

TEST(LayerCondition, ConditionTableShape) {
  const auto hsw = machine("hsw");
  const auto k = build_kernel(star7());
  const auto a = layer_conditions(k, hsw, GridDims::cubic(k.spec, 100));
  ASSERT_EQ(a.conditions.size(), 9u);
  EXPECT_FALSE(a.condition("L1", LcDim::d3).holds);
  EXPECT_TRUE(a.condition("L3", LcDim::d3).holds);
  EXPECT_TRUE(a.condition("L1", LcDim::d2).holds);
  EXPECT_DOUBLE_EQ(a.condition("L1", LcDim::d3).effective_bytes, 16384);
}

// At the reported break the condition fails, one below it holds, and the
// requirement grows with N.
TEST(LayerCondition, BreakBracketing) {
  std::mt19937_64 rng(17);
  const MachineModel machines[] = {machine("hsw"), machine("toy"), machine("skx"), machine("zen")};
  for (int trial = 0; trial < 120; ++trial) {
    const auto spec = random_spec(rng);
    const auto k = build_kernel(spec);
    const auto& m = machines[trial % 4];
    for (const auto& level : m.cache_levels) {
      for (const auto dim : {LcDim::d1, LcDim::d2, LcDim::d3}) {
        if (spec.dimensions == 2 && dim == LcDim::d3) continue;
        const auto n = lc_break_size(k, m, level.name, dim);
        const double eff = effective_size(level);
        auto req = [&](long N) { return lc_requirement(k, dim, N, N, level.line_size); };
        if (!n) {
          EXPECT_LE(req(1'000'000), eff) << spec.name();
          continue;
        }
        EXPECT_GT(req(*n), eff) << spec.name() << " " << level.name << to_string(dim);
        const long n_min = 2L * spec.radius + 2;
        EXPECT_GE(*n, n_min);
        if (*n > n_min) EXPECT_LE(req(*n - 1), eff) << spec.name() << " " << level.name << to_string(dim);
        EXPECT_LE(req(*n / 2 + 1), req(*n));
      }
    }
  }
}

TEST(LayerCondition, BlockSizeIsLargestFittingBlock) {
  std::mt19937_64 rng(23);
  const auto hsw = machine("hsw");
  for (int trial = 0; trial < 60; ++trial) {
    auto spec = random_spec(rng);
    spec.dimensions = 3;
    if (spec.kind == StencilKind::box) spec.radius = std::min(spec.radius, 2);
    const auto k = build_kernel(spec);
    const long P = 200 + 37 * trial;
    for (const char* level : {"L1", "L2", "L3"}) {
      const auto b = lc_block_size(k, hsw, level, P);
      const double eff = effective_size(hsw.level(level));
      if (!b) {
        EXPECT_GT(lc_requirement(k, LcDim::d3, 1, P, 64), eff);
        continue;
      }
      EXPECT_LE(lc_requirement(k, LcDim::d3, *b, P, 64), eff) << spec.name() << level;
      EXPECT_GT(lc_requirement(k, LcDim::d3, *b + 1, P, 64), eff) << spec.name() << level;
      // Recomputing the condition at the blocked extents confirms it holds.
      GridDims d = GridDims::cubic(spec, P);
      d.N = *b;
      if (*b >= 2 * spec.radius + 2)
        EXPECT_TRUE(layer_conditions(k, hsw, d).condition(level, LcDim::d3).holds);
    }
  }
}
