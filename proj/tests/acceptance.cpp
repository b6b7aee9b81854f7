// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if a
// primary criterion fails.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <iostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "stencilperf/bench.hpp"
#include "stencilperf/cache_sim.hpp"
#include "stencilperf/codegen.hpp"
#include "stencilperf/interpreter.hpp"
#include "stencilperf/layer_condition.hpp"
#include "stencilperf/perf_model.hpp"
#include "stencilperf/report.hpp"
#include "stencilperf/workflow.hpp"
#include "support.hpp"

using namespace sperf;
using namespace sperf::testing;
namespace fs = std::filesystem;

namespace {

enum class Outcome { pass, fail, skip };

struct Check {
  Outcome outcome = Outcome::pass;
  std::vector<std::string> problems;
  std::string note;

  void expect(bool ok, std::string what) {
    if (!ok) {
      outcome = Outcome::fail;
      if (problems.size() < 5) problems.push_back(std::move(what));
    }
  }
};

struct Criterion {
  std::string name;
  bool primary;
  double limit_s;
  std::function<Check()> run;
};

bool within(double a, double b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }

Check codegen_golden() {
  Check c;
  const char* names[] = {"star7", "star19", "box27"};
  const StencilSpec specs[] = {star7(), star19(), box27()};
  const int terms[] = {7, 19, 27};
  const int coefficients[] = {1, 19, 27};
  for (int i = 0; i < 3; ++i) {
    const auto k = build_kernel(specs[i]);
    const auto golden = read_file(golden_dir() / fmt::format("{}.c", names[i]));
    c.expect(!golden.empty(), fmt::format("golden {}.c missing", names[i]));
    c.expect(emit_kernel_source(k) == golden, fmt::format("{} differs from golden", names[i]));
    c.expect(static_cast<int>(k.terms.size()) == terms[i],
             fmt::format("{}: {} terms", names[i], k.terms.size()));
    c.expect(static_cast<int>(k.coefficients.size()) == coefficients[i],
             fmt::format("{}: {} coefficients", names[i], k.coefficients.size()));
  }
  const auto l1 = emit_kernel_source(build_kernel(star7()));
  c.expect(l1.find("b[k][j][i] = c0 * (a[k][j][i]") != std::string::npos,
           "star7 is not factored over c0");
  const auto l2 = emit_kernel_source(build_kernel(star19()));
  c.expect(l2.find("c18 * a[") != std::string::npos && l2.find("c19") == std::string::npos,
           "star19 coefficients are not c0..c18");
  const auto l3 = emit_kernel_source(build_kernel(box27()));
  c.expect(l3.find("W[27][M][N][P]") != std::string::npos &&
               l3.find("W[26][k][j][i] * a[k+1][j+1][i+1]") != std::string::npos,
           "box27 weight grid");
  return c;
}

Check lc_breaks() {
  Check c;
  const auto hsw = machine("hsw");
  const auto k = build_kernel(star7());
  const std::pair<const char*, long> observed[] = {{"L1", 30}, {"L2", 90}, {"L3", 760}};
  std::string got;
  for (const auto& [level, n] : observed) {
    const auto b = lc_break_size(k, hsw, level, LcDim::d3);
    c.expect(b && within(static_cast<double>(*b), static_cast<double>(n), 0.10),
             fmt::format("{}-3D break {} vs {}", level, b ? *b : -1, n));
    got += fmt::format(" {}-3D={}", level, b ? *b : -1);
  }
  c.note = got;
  return c;
}

Check lc_matches_simulator() {
  Check c;
  const auto toy = machine("toy");
  long compared = 0;
  for (const auto kind : {StencilKind::star, StencilKind::box})
    for (const int r : {1, 2})
      for (const auto w : {Weighting::homogeneous, Weighting::heterogeneous}) {
        const auto k = build_kernel(make_spec(3, r, kind, w));
        const double tol = k.op_counts.distinct_streams * 64.0;
        for (const long n : {16, 24, 32, 48, 64}) {
          const auto d = GridDims::cubic(k.spec, n);
          const auto lc = layer_conditions(k, toy, d).traffic;
          const auto cs = simulate_cache(k, toy, d).traffic;
          for (std::size_t i = 0; i < lc.links.size(); ++i) {
            const auto& a = lc.link(i);
            const auto& b = cs.link(i);
            c.expect(std::abs(a.load_bytes - b.load_bytes) <= tol &&
                         std::abs(a.store_bytes - b.store_bytes) <= tol,
                     fmt::format("{} N={} {}: LC {}/{} sim {}/{}", k.spec.name(), n, a.name,
                                 a.load_bytes, a.store_bytes, b.load_bytes, b.store_bytes));
            ++compared;
          }
        }
      }
  c.note = fmt::format(" {} link comparisons", compared);
  return c;
}

Check ecm_composition() {
  Check c;
  EcmTerms t{7, 7, 3, 6, 14};
  const double intel = compose_ecm(t, OverlapPolicy::intel_no_overlap).T_total;
  const double zen = compose_ecm(t, OverlapPolicy::zen_partial_overlap).T_total;
  c.expect(intel == 30, fmt::format("intel composition {}", intel));
  c.expect(zen == 20, fmt::format("zen composition {}", zen));

  for (const char* name : {"hsw", "bdw", "skx", "toy"}) {
    const auto m = machine(name);
    for (const auto& spec : {star7(), star19(), box27()}) {
      const auto k = build_kernel(spec);
      for (long n = 10; n <= 1200; n += 10) {
        const auto tr = layer_conditions(k, m, GridDims::cubic(spec, n)).traffic;
        const auto e = ecm(k, m, tr);
        const auto rl = roofline(tr, m, e.T_comp(), spec.element_bytes());
        c.expect(rl.cycles_per_cl <= e.T_total + 1e-9,
                 fmt::format("{} {} N={}: roofline {} above ECM {}", name, spec.name(), n,
                             rl.cycles_per_cl, e.T_total));
      }
    }
  }

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 100);
  for (int i = 0; i < 10000; ++i) {
    const EcmTerms r{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const double a = compose_ecm(r, OverlapPolicy::intel_no_overlap).T_total;
    const double b = compose_ecm(r, OverlapPolicy::zen_partial_overlap).T_total;
    const double transfers = *r.T_RegL1 + *r.T_L1L2 + *r.T_L2L3 + *r.T_L3MEM;
    c.expect(a >= b && b >= *r.T_comp && a >= *r.T_comp && a >= transfers - 1e-9 &&
                 b >= *r.T_L2L3 + *r.T_L3MEM - 1e-9,
             fmt::format("dominance violated at sample {}", i));
  }
  return c;
}

Check unit_conversion() {
  Check c;
  const auto hsw = machine("hsw");
  c.expect(hsw.clock_hz == 2.3e9, "hsw clock is not 2.3 GHz");
  c.expect(mlups_label(40, hsw, 8) == "460", "40 cy/CL label " + mlups_label(40, hsw, 8));
  c.expect(mlups_label(20, hsw, 8) == "920", "20 cy/CL label " + mlups_label(20, hsw, 8));
  c.expect(std::round(lups_to_cycles(460e6, hsw, 8)) == 40, "460 MLUP/s back to cycles");
  c.expect(std::round(lups_to_cycles(920e6, hsw, 8)) == 20, "920 MLUP/s back to cycles");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> e(-3, 6), clock(8, 10);
  for (int i = 0; i < 10000; ++i) {
    const double cy = std::pow(10.0, e(rng));
    const double hz = std::pow(10.0, clock(rng));
    const double lups = cycles_to_lups(cy, hz, 8);
    c.expect(std::abs(lups_to_cycles(lups, hz, 8) - cy) <= 1e-12 * cy,
             fmt::format("cycles round trip at {}", cy));
    c.expect(std::abs(cycles_to_lups(lups_to_cycles(lups, hz, 8), hz, 8) - lups) <= 1e-12 * lups,
             fmt::format("performance round trip at {}", lups));
  }
  return c;
}

Check traversal_invariance() {
  Check c;
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto spec = random_spec(rng);
    const auto k = build_kernel(spec);
    std::uniform_int_distribution<long> extra(0, 12);
    GridDims d = GridDims::cubic(spec, 2 * spec.radius + 2);
    if (spec.dimensions == 3) d.M += extra(rng);
    d.N += extra(rng);
    d.P += extra(rng);
    std::uniform_int_distribution<long> bs(1, d.N + 2);
    const Traversal blocked{BlockSpec{bs(rng)}};
    bool same;
    if (spec.element_type == ElementType::float64) {
      const auto in = make_inputs<double>(k, d, trial);
      same = interpret(k, d, in) == interpret(k, d, in, blocked);
    } else {
      const auto in = make_inputs<float>(k, d, trial);
      same = interpret(k, d, in) == interpret(k, d, in, blocked);
    }
    c.expect(same, fmt::format("{} block {}", spec.name(), blocked.block->size));
  }
  return c;
}

std::map<std::string, std::string> bundle_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename()] = read_file(e.path());
  return out;
}

Check workflow_determinism() {
  Check c;
  const auto toy = machine("toy");
  const auto p = plan(star7(), toy, 1ull << 30);
  WorkflowOptions o;
  o.command_line = "stencilperf workflow --machine machines/toy.yml --out-dir report";
  const auto base = fs::temp_directory_path() / "stencilperf-acceptance";
  fs::remove_all(base);
  write_bundle(run_workflow(p, o), base / "a");
  write_bundle(run_workflow(p, o), base / "b");
  const auto a = bundle_files(base / "a");
  const auto b = bundle_files(base / "b");
  c.expect(a == b, "artifacts differ between runs");
  const std::string header =
      "N^3,Benchmark cycl,ECM LC Tol,ECM LC Tnol,ECM LC Tl1l2,ECM LC Tl2l3,ECM LC Tl3mem,"
      "Roofline LC cycl,ECM CS Tol,ECM CS Tnol,ECM CS Tl1l2,ECM CS Tl2l3,ECM CS Tl3mem,"
      "Roofline CS cycl";
  const auto it = a.find("data.csv");
  c.expect(it != a.end(), "data.csv missing");
  if (it != a.end()) {
    const auto line = it->second.substr(0, it->second.find("\r\n"));
    c.expect(line == header, "data.csv header: " + line);
    c.expect(parse_csv(it->second).rows.size() == p.sizes.size(), "data.csv row count");
  }
  c.note = fmt::format(" {} artifacts", a.size());
  fs::remove_all(base);
  return c;
}

bool have_compiler() { return std::system("cc --version > /dev/null 2>&1") == 0; }

Check harness_bridge() {
  Check c;
  if (!have_compiler()) {
    c.outcome = Outcome::skip;
    c.note = " no C compiler";
    return c;
  }
  const auto hsw = machine("hsw");
  const auto k = build_kernel(star7());
  const auto dims = GridDims::cubic(k.spec, 40);
  BenchOptions o;
  o.compiler_template = compiler_template_from_env();
  o.min_runtime_s = 0.05;
  o.work_dir = fs::temp_directory_path() / "stencilperf-acceptance-bridge";
  const auto r = run_benchmark(k, {}, dims, hsw, o);
  const double expected = checksum(interpret(k, dims, make_inputs<double>(k, dims, o.seed)));
  c.expect(r.checksum == expected, fmt::format("checksum {} vs {}", r.checksum, expected));
  c.expect(within(r.mlups * 1e6, cycles_to_lups(r.cycles_per_cl, hsw, 8), 0.01),
           fmt::format("mlups {} vs cycles_per_cl {}", r.mlups, r.cycles_per_cl));
  c.note = fmt::format(" {:.1f} cy/CL", r.cycles_per_cl);
  fs::remove_all(o.work_dir);
  return c;
}

Check thread_sweep_shape() {
  Check c;
  if (std::thread::hardware_concurrency() < 2) {
    c.outcome = Outcome::skip;
    c.note = " single-core host";
    return c;
  }
  if (!have_compiler()) {
    c.outcome = Outcome::skip;
    c.note = " no C compiler";
    return c;
  }
  const auto toy = machine("toy");
  const auto k = build_kernel(star7());
  BenchOptions o;
  o.compiler_template = compiler_template_from_env();
  o.min_runtime_s = 0.05;
  o.work_dir = fs::temp_directory_path() / "stencilperf-acceptance-threads";
  const int threads = std::min<int>(toy.cores_per_socket, std::thread::hardware_concurrency());
  const auto s = thread_sweep(k, toy, GridDims::cubic(k.spec, 60), threads, o);
  c.expect(s.entries.size() == static_cast<std::size_t>(threads), "one entry per thread count");
  for (const auto& w : s.warnings) c.note += " [" + w + "]";
  fs::remove_all(o.work_dir);
  return c;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"codegen golden kernels", true, 1.0, codegen_golden},
      {"layer-condition breaks on hsw", true, 1.0, lc_breaks},
      {"layer conditions agree with cache simulator", true, 120.0, lc_matches_simulator},
      {"ECM composition and roofline bound", true, 10.0, ecm_composition},
      {"unit conversion anchors", true, 1.0, unit_conversion},
      {"blocked traversal invariance", true, 60.0, traversal_invariance},
      {"workflow determinism and CSV schema", true, 30.0, workflow_determinism},
      {"harness checksum bridge", false, 60.0, harness_bridge},
      {"thread sweep shape", false, 60.0, thread_sweep_shape},
  };
  int primary_failures = 0;
  for (const auto& cr : criteria) {
    const auto started = std::chrono::steady_clock::now();
    Check c;
    try {
      c = cr.run();
    } catch (const std::exception& e) {
      c.outcome = Outcome::fail;
      c.problems.push_back(std::string("exception: ") + e.what());
    }
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (c.outcome != Outcome::skip && s > cr.limit_s)
      c.expect(false, fmt::format("took {:.2f} s, limit {:.0f} s", s, cr.limit_s));
    const char* tag = c.outcome == Outcome::pass ? "PASS" : c.outcome == Outcome::fail ? "FAIL" : "SKIP";
    std::cout << fmt::format("{} [{}] {} ({:.2f} s){}\n", tag, cr.primary ? "primary" : "secondary",
                             cr.name, s, c.note);
    for (const auto& p : c.problems) std::cout << "    " << p << "\n";
    if (cr.primary && c.outcome == Outcome::fail) ++primary_failures;
  }
  return primary_failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
