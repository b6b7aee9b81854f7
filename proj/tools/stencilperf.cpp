#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "stencilperf/bench.hpp"
#include "stencilperf/cache_sim.hpp"
#include "stencilperf/codegen.hpp"
#include "stencilperf/layer_condition.hpp"
#include "stencilperf/machine.hpp"
#include "stencilperf/perf_model.hpp"
#include "stencilperf/report.hpp"
#include "stencilperf/stencil.hpp"
#include "stencilperf/workflow.hpp"

namespace fs = std::filesystem;
using namespace sperf;

namespace {

struct StencilFlags {
  int dim = 3;
  int radius = 1;
  std::string kind = "star";
  std::string weighting = "homogeneous";
  std::string coeff = "constant";
  std::string dtype = "float64";

  StencilSpec spec() const {
    StencilSpec s;
    s.dimensions = dim;
    s.radius = radius;
    s.kind = parse_kind(kind);
    s.weighting = parse_weighting(weighting);
    s.coefficients = parse_storage(coeff);
    s.element_type = parse_element_type(dtype);
    s.validate();
    return s;
  }
};

void add_stencil_flags(CLI::App* app, StencilFlags& f) {
  app->add_option("--dim", f.dim, "Dimensions (2 or 3)")->capture_default_str();
  app->add_option("--radius", f.radius, "Stencil radius")->capture_default_str();
  app->add_option("--kind", f.kind, "star | box")->capture_default_str();
  app->add_option("--weighting", f.weighting,
                  "homogeneous | heterogeneous | isotropic | point-symmetric")
      ->capture_default_str();
  app->add_option("--coeff", f.coeff, "constant | variable")->capture_default_str();
  app->add_option("--dtype", f.dtype, "float64 | float32")->capture_default_str();
}

// "10,20,30" or "10:100:10" (inclusive), mixed freely.
std::vector<long> parse_sizes(const std::vector<std::string>& items) {
  std::vector<long> out;
  for (const auto& item : items) {
    std::vector<long> parts;
    std::stringstream ss(item);
    for (std::string tok; std::getline(ss, tok, ':');) {
      std::size_t used = 0;
      long v = 0;
      try {
        v = std::stol(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || tok.empty())
        throw CLI::ValidationError("--sizes", fmt::format("'{}' is not a size or range", item));
      parts.push_back(v);
    }
    if (parts.size() == 1) {
      out.push_back(parts[0]);
    } else if (parts.size() == 3 && parts[2] > 0 && parts[0] <= parts[1]) {
      for (long n = parts[0]; n <= parts[1]; n += parts[2]) out.push_back(n);
    } else {
      throw CLI::ValidationError("--sizes", fmt::format("'{}' is not first:last:step", item));
    }
  }
  return out;
}

// Accepts plain bytes or a K/M/G/T suffix (binary multiples, optional "iB").
std::uint64_t parse_bytes(const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--memory-budget", fmt::format("'{}' is not a size", text));
  }
  std::string unit = text.substr(used);
  if (unit.size() > 1 && (unit.substr(1) == "iB" || unit.substr(1) == "B")) unit = unit.substr(0, 1);
  double scale = 1;
  if (unit == "K" || unit == "k") scale = 1024.0;
  else if (unit == "M") scale = 1024.0 * 1024;
  else if (unit == "G") scale = 1024.0 * 1024 * 1024;
  else if (unit == "T") scale = 1024.0 * 1024 * 1024 * 1024;
  else if (!unit.empty() && unit != "B")
    throw CLI::ValidationError("--memory-budget", fmt::format("unknown unit in '{}'", text));
  if (v <= 0) throw CLI::ValidationError("--memory-budget", "must be positive");
  return static_cast<std::uint64_t>(v * scale);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", p.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string shell_quote(const std::string& s) {
  if (!s.empty() && s.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
                                        "0123456789-_./:=,+@%") == std::string::npos)
    return s;
  std::string q = "'";
  for (const char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

std::string command_line(int argc, char** argv) {
  std::string s = "stencilperf";
  for (int i = 1; i < argc; ++i) s += " " + shell_quote(argv[i]);
  return s;
}

std::string ecm_notation(const EcmPrediction& e) {
  auto t = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("?"); };
  return fmt::format("{{{} || {} | {} | {} | {}}} cy/CL", t(e.terms.T_comp), t(e.terms.T_RegL1),
                     t(e.terms.T_L1L2), t(e.terms.T_L2L3), t(e.terms.T_L3MEM));
}

void print_lc(const KernelIR& kernel, const MachineModel& m, const GridDims& dims) {
  const auto a = layer_conditions(kernel, m, dims);
  fmt::print("N={}  layer conditions\n", dims.N);
  fmt::print("  {:<6} {:<5} {:>14} {:>14} {:<6} {}\n", "level", "class", "requirement B",
             "effective B", "holds", "breaks at N");
  for (const auto& c : a.conditions)
    fmt::print("  {:<6} {:<5} {:>14.0f} {:>14.0f} {:<6} {}\n", c.level, to_string(c.dimensionality),
               c.requirement_bytes, c.effective_bytes, c.holds ? "yes" : "no",
               c.break_size ? fmt::format("{}", *c.break_size) : std::string("never"));
  for (const auto& l : a.traffic.links)
    fmt::print("  {:<7} load {:>8} B/CL  store {:>8} B/CL\n", l.name, format_number(l.load_bytes),
               format_number(l.store_bytes));
}

int cmd_generate(const StencilFlags& f, const std::string& out_dir, bool openmp, bool markers,
                 std::optional<long> block, bool snippet) {
  const auto kernel = build_kernel(f.spec());
  if (snippet) {
    fmt::print("{}", emit_kernel_source(kernel));
    return 0;
  }
  CodegenOptions cg;
  cg.openmp = openmp;
  cg.markers = markers;
  if (block) cg.blocking = BlockSpec{*block};
  const auto source = emit_c(kernel, cg);
  if (out_dir.empty()) {
    fmt::print("{}", source);
    return 0;
  }
  fs::create_directories(out_dir);
  const auto path = fs::path(out_dir) / "kernel.c";
  std::ofstream(path, std::ios::binary) << source;
  fmt::print(stderr, "wrote {}\n", path.string());
  return 0;
}

int cmd_analyze(const std::string& what, const StencilFlags& f, const MachineModel& m,
                const std::vector<long>& sizes, bool serialize) {
  const auto spec = f.spec();
  const auto kernel = build_kernel(spec);
  InCoreOptions ic;
  ic.serialize_load_store = serialize;
  for (const long n : sizes) {
    const auto dims = GridDims::cubic(spec, n);
    dims.validate(spec);
    if (what == "lc") {
      print_lc(kernel, m, dims);
      continue;
    }
    const auto traffic = layer_conditions(kernel, m, dims).traffic;
    const auto e = ecm(kernel, m, traffic, ic);
    if (what == "ecm") {
      fmt::print("N={}  ECM {} = {} cy/CL ({}, {} MLUP/s)\n", n, ecm_notation(e),
                 format_number(e.T_total), to_string(e.policy),
                 mlups_label(e.T_total, m, spec.element_bytes()));
    } else {
      const auto r = roofline(traffic, m, e.T_comp(), spec.element_bytes());
      fmt::print("N={}  Roofline {} cy/CL, bottleneck {} ({:.1f} MLUP/s)\n", n,
                 format_number(r.cycles_per_cl), r.bottleneck, r.performance / 1e6);
      for (const auto& [name, cy] : r.candidates)
        fmt::print("  {:<8} {} cy/CL\n", name, format_number(cy));
    }
  }
  return 0;
}

int cmd_simulate(const StencilFlags& f, const MachineModel& m, const std::vector<long>& sizes,
                 std::size_t budget, int warmup, const std::string& trace_path) {
  const auto spec = f.spec();
  const auto kernel = build_kernel(spec);
  std::ofstream trace;
  if (!trace_path.empty()) trace.open(trace_path, std::ios::binary);
  for (const long n : sizes) {
    const auto dims = GridDims::cubic(spec, n);
    dims.validate(spec);
    SimulationOptions so;
    so.element_budget = budget;
    so.warmup_sweeps = warmup;
    if (trace.is_open()) so.trace = &trace;
    const auto r = simulate_cache(kernel, m, dims, so);
    fmt::print("N={}  {} accesses\n", n, r.accesses);
    for (std::size_t i = 0; i < r.counters.size(); ++i)
      fmt::print("  {:<4} hits {:>10} misses {:>10} evictions {:>10} write-backs {:>10}\n",
                 m.cache_levels[i].name, r.counters[i].hits, r.counters[i].misses,
                 r.counters[i].evictions, r.counters[i].write_backs);
    for (const auto& l : r.traffic.links)
      fmt::print("  {:<7} load {:>8} B/CL  store {:>8} B/CL\n", l.name, format_number(l.load_bytes),
                 format_number(l.store_bytes));
  }
  return 0;
}

int cmd_bench(const StencilFlags& f, const MachineModel& m, const std::vector<long>& sizes,
              BenchOptions bo, std::optional<long> block) {
  const auto kernel = build_kernel(f.spec());
  CodegenOptions cg;
  cg.openmp = bo.threads > 1;
  if (block) cg.blocking = BlockSpec{*block};
  const auto sweep = grid_sweep(kernel, m, sizes, bo, cg);
  for (const auto& w : sweep.warnings) fmt::print(stderr, "warning: {}\n", w);
  fmt::print("N^3,threads,sweeps,wall_s,cycles_per_cl,mlups,checksum\n");
  int failures = 0;
  for (const auto& e : sweep.entries) {
    if (!e.result) {
      fmt::print(stderr, "N={} failed: {}\n", e.size, e.error);
      ++failures;
      continue;
    }
    const auto& r = *e.result;
    for (const auto& w : r.warnings) fmt::print(stderr, "warning: {}\n", w);
    fmt::print("{},{},{},{},{},{},{}\n", e.size, r.threads, r.sweeps, format_number(r.wall_s),
               format_number(r.cycles_per_cl), format_number(r.mlups), format_number(r.checksum));
  }
  return failures ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stencil kernel generation, performance modeling and benchmarking"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "stencilperf 0.1.0");

  StencilFlags sf;
  std::string machine_path;
  std::vector<std::string> size_items;
  std::string out_dir;
  std::optional<long> block;
  std::string memory_budget = "4GiB";
  int threads = 0;
  double min_runtime = 1.0;
  std::uint64_t seed = 1;

  auto* gen = app.add_subcommand("generate", "Emit the C benchmark for a stencil");
  add_stencil_flags(gen, sf);
  bool openmp = false, markers = false, snippet = false;
  gen->add_flag("--openmp", openmp, "Parallelize the outer loop");
  gen->add_flag("--markers", markers, "Emit region markers around the sweep");
  gen->add_flag("--snippet", snippet, "Print only the kernel loop nest");
  gen->add_option("--block", block, "Middle-loop block size");
  gen->add_option("--out-dir", out_dir, "Write kernel.c here instead of stdout");

  auto* analyze = app.add_subcommand("analyze", "Layer conditions, ECM or Roofline");
  std::string what;
  analyze->add_option("what", what, "lc | ecm | roofline")
      ->required()
      ->check(CLI::IsMember({"lc", "ecm", "roofline"}));
  add_stencil_flags(analyze, sf);
  bool serialize = false;
  analyze->add_option("--machine", machine_path, "Machine file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--sizes", size_items, "Cubic edges: 10,20 or 10:100:10")
      ->delimiter(',')
      ->required();
  analyze->add_flag("--serialize-load-store", serialize,
                    "Loads and stores share one port budget");

  auto* simulate = app.add_subcommand("simulate", "Cache simulation of the kernel's accesses");
  add_stencil_flags(simulate, sf);
  std::size_t element_budget = std::size_t{1} << 22;
  int warmup = 1;
  std::string trace_path;
  simulate->add_option("--machine", machine_path, "Machine file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--sizes", size_items, "Cubic edges")->delimiter(',')->required();
  simulate->add_option("--element-budget", element_budget, "Largest grid in points per array")
      ->capture_default_str();
  simulate->add_option("--warmup", warmup, "Warm-up sweeps")->capture_default_str();
  simulate->add_option("--trace", trace_path, "Write the measured sweep's address trace");

  auto* bench = app.add_subcommand("bench", "Compile and run the benchmark");
  add_stencil_flags(bench, sf);
  bench->add_option("--machine", machine_path, "Machine file")->required()->check(CLI::ExistingFile);
  bench->add_option("--sizes", size_items, "Cubic edges")->delimiter(',')->required();
  bench->add_option("--threads", threads, "OpenMP threads")->check(CLI::PositiveNumber);
  bench->add_option("--block", block, "Middle-loop block size");
  bench->add_option("--min-runtime", min_runtime, "Seconds per measurement")->capture_default_str();
  bench->add_option("--seed", seed, "Initialization seed")->capture_default_str();

  auto* workflow = app.add_subcommand("workflow", "Full data collection and report");
  add_stencil_flags(workflow, sf);
  long step = 10;
  std::string block_level;
  bool with_benchmarks = false;
  std::size_t sim_budget = std::size_t{1} << 20;
  std::string counters_csv, counter_map, status;
  std::string status_comment;
  workflow->add_option("--machine", machine_path, "Machine file")->required()->check(CLI::ExistingFile);
  workflow->add_option("--sizes", size_items, "Explicit cubic edges instead of the planned sweep")
      ->delimiter(',');
  workflow->add_option("--step", step, "Grid step")->capture_default_str();
  workflow->add_option("--threads", threads, "Largest core count of the scaling run")
      ->check(CLI::PositiveNumber);
  workflow->add_option("--block-level", block_level, "Cache level blocking targets (default: last)");
  workflow->add_option("--memory-budget", memory_budget, "Largest total array size, e.g. 8GiB")
      ->capture_default_str();
  workflow->add_flag("--with-benchmarks", with_benchmarks, "Compile and run benchmarks");
  workflow->add_option("--sim-budget", sim_budget, "Largest simulated grid in points per array")
      ->capture_default_str();
  workflow->add_option("--counters", counters_csv, "Counter export for the phenomenological model")
      ->check(CLI::ExistingFile);
  workflow->add_option("--counter-map", counter_map, "Column mapping of the counter export")
      ->check(CLI::ExistingFile);
  workflow->add_option("--status", status, "Override the status: green | yellow | red")
      ->check(CLI::IsMember({"green", "yellow", "red"}));
  workflow->add_option("--status-comment", status_comment, "Comment shown with the status");
  workflow->add_option("--min-runtime", min_runtime, "Seconds per measurement")->capture_default_str();
  workflow->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Re-render plots and page from a result directory");
  add_stencil_flags(report, sf);
  report->add_option("--machine", machine_path, "Machine file")->required()->check(CLI::ExistingFile);
  report->add_option("--out-dir", out_dir, "Directory holding data.csv")->required()->check(
      CLI::ExistingDirectory);
  report->add_option("--status", status, "Override the status: green | yellow | red")
      ->check(CLI::IsMember({"green", "yellow", "red"}));
  report->add_option("--status-comment", status_comment, "Comment shown with the status");

  CLI11_PARSE(app, argc, argv);

  try {
    std::optional<MachineModel> machine;
    if (!machine_path.empty()) machine = load_machine(machine_path);
    const auto sizes = parse_sizes(size_items);

    if (gen->parsed()) return cmd_generate(sf, out_dir, openmp, markers, block, snippet);
    if (analyze->parsed()) return cmd_analyze(what, sf, *machine, sizes, serialize);
    if (simulate->parsed())
      return cmd_simulate(sf, *machine, sizes, element_budget, warmup, trace_path);

    BenchOptions bo;
    bo.compiler_template = compiler_template_from_env();
    bo.extra_flags = machine ? machine->compiler_flags : std::string();
    bo.min_runtime_s = min_runtime;
    bo.seed = seed;
    bo.threads = std::max(threads, 1);
    if (bench->parsed()) return cmd_bench(sf, *machine, sizes, bo, block);

    WorkflowOptions wo;
    wo.command_line = command_line(argc, argv);
    wo.machine_file_text = read_text(machine_path);
    wo.machine_file_name = machine_path;
    wo.status_comment = status_comment;
    if (!status.empty()) wo.status_override = parse_status(status);

    if (report->parsed()) {
      const auto bundle = rebuild_report(out_dir, sf.spec(), *machine, wo);
      write_bundle(bundle, out_dir);
      for (const auto& n : bundle.plots.notices) fmt::print(stderr, "notice: {}\n", n);
      fmt::print("status: {} ({})\n", to_string(bundle.status.status), bundle.status.comment);
      return 0;
    }

    wo.with_benchmarks = with_benchmarks;
    wo.simulation_budget = sim_budget;
    wo.bench = bo;
    wo.bench.threads = 1;
    if (!counters_csv.empty()) {
      if (counter_map.empty()) throw std::runtime_error("--counters needs --counter-map");
      wo.measurements = ingest_counters(counters_csv, load_counter_mapping(counter_map));
    }
    auto p = plan(sf.spec(), *machine, parse_bytes(memory_budget), step, block_level);
    if (threads > 0) {
      p.thread_counts.clear();
      for (int t = 1; t <= threads; ++t) p.thread_counts.push_back(t);
    }
    if (!sizes.empty()) {
      auto s = sizes;
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
      p.sizes = s;
    }
    const auto bundle = run_workflow(p, wo);
    write_bundle(bundle, out_dir);
    for (const auto& n : bundle.notes) fmt::print(stderr, "note: {}\n", n);
    for (const auto& n : bundle.plots.notices) fmt::print(stderr, "notice: {}\n", n);
    fmt::print("wrote {} ({} sizes, status {})\n", out_dir, p.sizes.size(),
               to_string(bundle.status.status));
    return 0;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
