#include <gtest/gtest.h>

#include <random>

#include <yaml-cpp/yaml.h>

#include "stencilperf/machine.hpp"
#include "support.hpp"

using namespace sperf;
using namespace sperf::testing;

namespace {

const char* kMachines[] = {"hsw", "bdw", "skx", "zen", "toy"};

// Scalar leaves of a machine file as (path, node-accessor) pairs.
std::vector<std::vector<std::string>> leaf_paths(const YAML::Node& root) {
  std::vector<std::vector<std::string>> out;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (kv.second.IsScalar()) {
      out.push_back({key});
    } else if (kv.second.IsMap()) {
      for (const auto& sub : kv.second) out.push_back({key, sub.first.as<std::string>()});
    } else if (kv.second.IsSequence()) {
      for (std::size_t i = 0; i < kv.second.size(); ++i)
        for (const auto& sub : kv.second[i])
          out.push_back({key, std::to_string(i), sub.first.as<std::string>()});
    }
  }
  return out;
}

std::string display(const std::vector<std::string>& p) {
  if (p.size() == 1) return p[0];
  if (p.size() == 2) return p[0] + "." + p[1];
  return p[0] + "[" + p[1] + "]." + p[2];
}

YAML::Node parent_of(YAML::Node root, const std::vector<std::string>& p) {
  if (p.size() == 1) return root;
  if (p.size() == 2) return root[p[0]];
  return root[p[0]][std::stoi(p[1])];
}

}  // namespace

TEST(Machine, ShippedFilesLoad) {
  for (const char* name : kMachines) {
    SCOPED_TRACE(name);
    const auto m = machine(name);
    EXPECT_NO_THROW(m.validate());
    EXPECT_EQ(m.cache_levels.size(), 3u);
  }
  const auto hsw = machine("hsw");
  EXPECT_DOUBLE_EQ(hsw.clock_hz, 2.3e9);
  EXPECT_EQ(hsw.level("L1").size_bytes, 32768u);
  EXPECT_EQ(hsw.level("L2").size_bytes, 262144u);
  EXPECT_EQ(hsw.numa_domains(), 2);
  EXPECT_EQ(machine("zen").overlap_policy, OverlapPolicy::zen_partial_overlap);
  EXPECT_TRUE(machine("skx").cache_levels.back().victim);
  EXPECT_THROW(hsw.level("L4"), MachineError);
}

TEST(Machine, RoundTrip) {
  for (const char* name : kMachines) {
    SCOPED_TRACE(name);
    const auto m = machine(name);
    const auto text = serialize_machine(m);
    EXPECT_EQ(parse_machine(text), m);
    EXPECT_EQ(serialize_machine(parse_machine(text)), text);
  }
}

TEST(Machine, RandomValidMachinesRoundTrip) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto m = machine("toy");
    std::uniform_real_distribution<double> u(0.1, 10);
    m.clock_hz = 1e9 * u(rng);
    m.mem_bandwidth.per_numa_domain = 1e9 * u(rng);
    m.mem_bandwidth.per_socket = m.mem_bandwidth.per_numa_domain * 2;
    for (auto& l : m.cache_levels) l.upstream_bandwidth = u(rng);
    m.ports.fma = trial % 2;
    m.compiler_flags = trial % 3 ? "-O3 \"quoted\" -march=x" : "";
    ASSERT_NO_THROW(m.validate());
    EXPECT_EQ(parse_machine(serialize_machine(m)), m);
  }
}

// Every single-field corruption of a valid file is rejected and the error
// names the field.
TEST(Machine, SingleFieldCorruptionsAreRejected) {
  const auto text = read_file(machine_dir() / "hsw.yml");
  const auto root = YAML::Load(text);
  int checked = 0;
  for (const auto& path : leaf_paths(root)) {
    const std::string leaf = path.back();
    SCOPED_TRACE(display(path));
    {  // removal
      auto doc = YAML::Clone(root);
      parent_of(doc, path).remove(leaf);
      try {
        parse_machine(YAML::Dump(doc));
        ADD_FAILURE() << "missing field accepted";
      } catch (const MachineError& e) {
        EXPECT_NE(std::string(e.what()).find(display(path)), std::string::npos) << e.what();
      }
      ++checked;
    }
    if (leaf == "name" || leaf == "compiler_flags") continue;
    {  // wrong type
      auto doc = YAML::Clone(root);
      parent_of(doc, path)[leaf] = "not-a-value";
      try {
        parse_machine(YAML::Dump(doc));
        ADD_FAILURE() << "wrong type accepted";
      } catch (const MachineError& e) {
        EXPECT_NE(std::string(e.what()).find(display(path)), std::string::npos) << e.what();
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 40);

  auto doc = YAML::Clone(root);
  doc["cache_levels"][1]["associativity"] = 4;
  try {
    parse_machine(YAML::Dump(doc));
    ADD_FAILURE() << "unknown key accepted";
  } catch (const MachineError& e) {
    EXPECT_NE(std::string(e.what()).find("cache_levels[1].associativity"), std::string::npos);
  }
}

TEST(Machine, InvariantViolations) {
  const auto base = machine("hsw");
  auto expect_bad = [](MachineModel m, const char* needle) {
    try {
      m.validate();
      ADD_FAILURE() << "accepted: " << needle;
    } catch (const MachineError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  auto m = base;
  m.cache_levels[1].size_bytes = 16384;
  expect_bad(m, "cache_levels[1].size_bytes");
  m = base;
  m.cache_levels[0].line_size = 48;
  expect_bad(m, "cache_levels[0].line_size_bytes");
  m = base;
  m.cache_levels[2].line_size = 128;
  m.cache_levels[2].size_bytes = 128 * 20 * 1024;
  expect_bad(m, "line_size_bytes");
  m = base;
  m.cache_levels[0].victim = true;
  expect_bad(m, "victim");
  m = base;
  m.cores_per_numa_domain = 5;
  expect_bad(m, "cores_per_numa_domain");
  m = base;
  m.cache_levels.pop_back();
  expect_bad(m, "cache_levels");
  m = base;
  m.cache_levels[1].name = "L1";
  expect_bad(m, "duplicate");
  m = base;
  m.ports.vector_bits = 100;
  expect_bad(m, "ports.vector_bits");
  m = base;
  m.mem_bandwidth.per_socket = 1e9;
  expect_bad(m, "bandwidth");
  EXPECT_THROW(parse_machine("name: [unterminated"), MachineError);
  EXPECT_THROW(load_machine(machine_dir() / "missing.yml"), MachineError);
}

TEST(Machine, TransferCycles) {
  const auto hsw = machine("hsw");
  // Half duplex adds load and store volume.
  EXPECT_DOUBLE_EQ(cycles_per_cl(hsw.level("L2"), 128, 64), 3.0);
  EXPECT_DOUBLE_EQ(cycles_per_cl(hsw.level("L3"), 128, 64), 6.0);
  auto full = hsw.level("L2");
  full.duplex = Duplex::full;
  EXPECT_DOUBLE_EQ(cycles_per_cl(full, 128, 64), 2.0);
  // 27.6 GB/s at 2.3 GHz is 12 B/cy.
  EXPECT_DOUBLE_EQ(mem_cycles_per_cl(hsw, 192), 16.0);
  EXPECT_DOUBLE_EQ(effective_size(hsw.level("L1")), 16384.0);
  EXPECT_THROW(effective_size(hsw.level("L1"), 0.0), std::invalid_argument);
  EXPECT_THROW(effective_size(hsw.level("L1"), 1.5), std::invalid_argument);
}
