#include <gtest/gtest.h>

#include <list>
#include <map>
#include <random>
#include <sstream>

#include "stencilperf/cache_sim.hpp"
#include "stencilperf/layer_condition.hpp"
#include "support.hpp"

using namespace sperf;
using namespace sperf::testing;

namespace {

CacheLevelSpec level(const char* name, std::uint64_t size, unsigned ways, bool victim = false) {
  CacheLevelSpec l;
  l.name = name;
  l.size_bytes = size;
  l.ways = ways;
  l.line_size = 64;
  l.victim = victim;
  l.upstream_bandwidth = 32;
  return l;
}

// Textbook single-level write-back, write-allocate LRU cache.
struct LruOracle {
  std::uint64_t sets;
  unsigned ways;
  std::map<std::uint64_t, std::list<std::pair<std::uint64_t, bool>>> lru;  // front = newest
  LevelCounters c;

  void access(std::uint64_t address, bool store) {
    const auto line = address / 64;
    auto& s = lru[line % sets];
    for (auto it = s.begin(); it != s.end(); ++it) {
      if (it->first == line) {
        const bool dirty = it->second || store;
        s.erase(it);
        s.emplace_front(line, dirty);
        ++c.hits;
        return;
      }
    }
    ++c.misses;
    s.emplace_front(line, store);
    if (s.size() > ways) {
      ++c.evictions;
      if (s.back().second) ++c.write_backs;
      s.pop_back();
    }
  }
};

}  // namespace

TEST(CacheSim, HandTrace) {
  CacheHierarchySim sim({level("L1", 2 * 8 * 64, 2)});
  // Lines 0, 8 and 16 share set 0.
  EXPECT_FALSE(sim.load(0));
  EXPECT_FALSE(sim.load(8 * 64));
  EXPECT_TRUE(sim.load(0));
  EXPECT_FALSE(sim.load(16 * 64));  // evicts line 8
  EXPECT_FALSE(sim.contains(0, 8 * 64));
  EXPECT_TRUE(sim.contains(0, 0));
  EXPECT_FALSE(sim.load(8 * 64));  // evicts line 0
  EXPECT_FALSE(sim.store(0));      // evicts line 16, allocates dirty
  EXPECT_TRUE(sim.is_dirty(0, 0));
  EXPECT_TRUE(sim.store(8));
  EXPECT_FALSE(sim.load(24 * 64));  // evicts line 8 (clean)
  EXPECT_FALSE(sim.load(32 * 64));  // evicts line 0 (dirty)
  const auto& c = sim.counters(0);
  EXPECT_EQ(c.hits, 2u);
  EXPECT_EQ(c.misses, 7u);
  EXPECT_EQ(c.evictions, 5u);
  EXPECT_EQ(c.write_backs, 1u);
  EXPECT_EQ(sim.link(0).load_bytes, 7u * 64);
  EXPECT_EQ(sim.link(0).store_bytes, 64u);
}

TEST(CacheSim, MatchesLruOracleOnRandomTraces) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    CacheHierarchySim sim({level("L1", 2 * 8 * 64, 2)});
    LruOracle oracle{8, 2, {}, {}};
    std::uniform_int_distribution<std::uint64_t> addr(0, 64 * 64 - 1);
    std::bernoulli_distribution store(0.3);
    for (int i = 0; i < 5000; ++i) {
      const auto a = addr(rng);
      const bool s = store(rng);
      sim.access({s ? AccessKind::store : AccessKind::load, a});
      oracle.access(a, s);
    }
    EXPECT_EQ(sim.counters(0), oracle.c);
  }
}

TEST(CacheSim, InclusionAndConservation) {
  std::mt19937_64 rng(5);
  CacheHierarchySim sim({level("L1", 4 * 8 * 64, 4), level("L2", 8 * 16 * 64, 8),
                         level("L3", 8 * 64 * 64, 8)});
  std::uniform_int_distribution<std::uint64_t> addr(0, 2048 * 64 - 1);
  std::bernoulli_distribution store(0.25);
  std::vector<std::uint64_t> touched;
  for (int i = 0; i < 50000; ++i) {
    const auto a = addr(rng);
    touched.push_back(a);
    sim.access({store(rng) ? AccessKind::store : AccessKind::load, a});
    if (i % 5000 == 0) {
      for (const auto t : touched)
        if (sim.contains(0, t)) {
          EXPECT_TRUE(sim.contains(1, t));
          EXPECT_TRUE(sim.contains(2, t));
        }
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& c = sim.counters(i);
    EXPECT_EQ(sim.link(i).load_bytes, c.misses * 64) << i;
    EXPECT_EQ(sim.link(i).store_bytes, c.write_backs * 64) << i;
    if (i + 1 < 3) {
      const auto& below = sim.counters(i + 1);
      EXPECT_EQ(below.hits + below.misses, c.misses) << i;
    }
    EXPECT_LE(sim.resident_lines(i), sim.levels()[i].size_bytes / 64);
  }
}

TEST(CacheSim, VictimLastLevel) {
  auto l1 = level("L1", 1 * 1 * 64, 1);
  auto l2 = level("L2", 1 * 2 * 64, 1);
  auto l3 = level("L3", 4 * 2 * 64, 4, true);
  CacheHierarchySim sim({l1, l2, l3});
  // L2 is direct mapped with 2 sets; lines 0 and 2 collide.
  sim.load(0);
  EXPECT_FALSE(sim.contains(2, 0)) << "victim caches are not filled by loads";
  sim.load(2 * 64);
  EXPECT_TRUE(sim.contains(2, 0)) << "L2 eviction lands in the victim cache";
  EXPECT_EQ(sim.counters(2).misses, 2u);
  sim.load(0);
  EXPECT_EQ(sim.counters(2).hits, 1u);
  EXPECT_FALSE(sim.contains(2, 0)) << "a reload moves the line out of the victim cache";
  EXPECT_TRUE(sim.contains(2, 2 * 64));
  EXPECT_THROW(CacheHierarchySim({l3, l1}), SimulationError);
  auto wt = l2;
  wt.write_back = false;
  EXPECT_THROW(CacheHierarchySim({l1, wt, l3}), SimulationError);
  auto bad = l1;
  bad.size_bytes = 100;
  EXPECT_THROW(CacheHierarchySim({bad}), SimulationError);
}

TEST(CacheSim, WriteThroughAndNoAllocate) {
  auto l1 = level("L1", 2 * 8 * 64, 2);
  l1.write_back = false;
  auto l2 = level("L2", 4 * 16 * 64, 4);
  CacheHierarchySim sim({l1, l2}, 8);
  sim.store(0);
  EXPECT_FALSE(sim.is_dirty(0, 0));
  EXPECT_TRUE(sim.is_dirty(1, 0));
  EXPECT_EQ(sim.link(0).store_bytes, 8u);

  auto na = level("L1", 2 * 8 * 64, 2);
  na.write_allocate = false;
  CacheHierarchySim sim2({na, l2}, 8);
  sim2.store(128);
  EXPECT_FALSE(sim2.contains(0, 128));
  EXPECT_TRUE(sim2.contains(1, 128));
}

TEST(AddressStream, OrderAndLayout) {
  const auto k = build_kernel(box27());
  const auto d = GridDims::cubic(k.spec, 4);
  const auto layout = array_layout(k, d);
  EXPECT_EQ(layout.read_base, 0u);
  EXPECT_EQ(layout.write_base, 512u);
  EXPECT_EQ(layout.weight_bases.size(), 27u);
  EXPECT_EQ(layout.weight_bases[0], 1024u);
  const auto s = address_stream(k, d);
  // 8 interior points, each 27 weight and 27 data loads plus one store.
  ASSERT_EQ(s.size(), 8u * 55);
  EXPECT_EQ(s[0], (MemoryAccess{AccessKind::load, layout.weight_bases[0] + (16 + 4 + 1) * 8}));
  EXPECT_EQ(s[1], (MemoryAccess{AccessKind::load, (16 + 4 + 1) * 8}));
  EXPECT_EQ(s[54], (MemoryAccess{AccessKind::store, layout.write_base + (16 + 4 + 1) * 8}));

  std::ostringstream os;
  dump_trace(os, build_kernel(star7()), GridDims::cubic(star7(), 4));
  EXPECT_EQ(os.str().substr(0, 8), "L 0xa8\nL");  // (16 + 4 + 1) * 8
  EXPECT_NE(os.str().find("S 0x"), std::string::npos);
}

TEST(AddressStream, BlockedTraversalVisitsSamePoints) {
  const auto k = build_kernel(star7());
  const auto d = GridDims::cubic(k.spec, 12);
  auto a = address_stream(k, d);
  auto b = address_stream(k, d, Traversal{BlockSpec{3}});
  EXPECT_NE(a, b);
  auto key = [](const MemoryAccess& m) { return std::pair(int(m.kind), m.address); };
  std::sort(a.begin(), a.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
  std::sort(b.begin(), b.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
  EXPECT_EQ(a, b);
}

TEST(Simulation, RefusesOverBudget) {
  const auto k = build_kernel(star7());
  SimulationOptions o;
  o.element_budget = 1000;
  try {
    simulate_cache(k, machine("toy"), GridDims::cubic(k.spec, 11), o);
    ADD_FAILURE();
  } catch (const SimulationError& e) {
    EXPECT_NE(std::string(e.what()).find("element budget is 1000"), std::string::npos);
  }
}

TEST(Simulation, AgreesWithLayerConditionsOnSmallCases) {
  const auto toy = machine("toy");
  for (const auto& spec : {star7(), make_spec(3, 1, StencilKind::box, Weighting::heterogeneous)}) {
    const auto k = build_kernel(spec);
    for (long n : {16, 32}) {
      const auto d = GridDims::cubic(spec, n);
      const auto lc = layer_conditions(k, toy, d).traffic;
      const auto cs = simulate_cache(k, toy, d).traffic;
      const double tol = k.op_counts.distinct_streams * 64.0;
      for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(cs.link(i).load_bytes, lc.link(i).load_bytes, tol) << spec.name() << n << i;
        EXPECT_NEAR(cs.link(i).store_bytes, lc.link(i).store_bytes, tol) << spec.name() << n << i;
      }
    }
  }
}
