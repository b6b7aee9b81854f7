#include "stencilperf/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "stencilperf/cache_sim.hpp"
#include "stencilperf/codegen.hpp"

namespace sperf {

namespace {

LcDim top_dim(const StencilSpec& spec) { return spec.dimensions == 3 ? LcDim::d3 : LcDim::d2; }

GridDims cube(const StencilSpec& spec, long n) { return GridDims::cubic(spec, n); }

void write_file(const std::filesystem::path& p, std::string_view text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", p.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write to {} failed", p.string()));
}

std::string join_sizes(const std::vector<long>& sizes) {
  std::string s;
  for (const long n : sizes) s += fmt::format("{}{}", s.empty() ? "" : ",", n);
  return s;
}

std::vector<std::string> reproduction_commands(const WorkflowPlan& p, const WorkflowOptions& o) {
  const std::string flags = cli_flags(p.spec);
  const std::string& m = o.machine_file_name;
  std::vector<std::string> cmds;
  if (!o.command_line.empty()) cmds.push_back("# command line of this run\n" + o.command_line);
  cmds.push_back("# kernel and benchmark source");
  cmds.push_back(fmt::format("stencilperf generate {} --out-dir .", flags));
  cmds.push_back("# layer conditions, ECM and Roofline at the largest size");
  for (const char* what : {"lc", "ecm", "roofline"})
    cmds.push_back(fmt::format("stencilperf analyze {} {} --machine {} --sizes {}", what, flags, m,
                               p.max_size()));
  cmds.push_back("# cache simulation");
  cmds.push_back(fmt::format("stencilperf simulate {} --machine {} --sizes {}", flags, m,
                             join_sizes(p.sizes)));
  cmds.push_back("# benchmark sweep");
  cmds.push_back(fmt::format("stencilperf bench {} --machine {} --sizes {} --threads 1", flags, m,
                             join_sizes(p.sizes)));
  cmds.push_back("# complete workflow");
  cmds.push_back(fmt::format(
      "stencilperf workflow {} --machine {} --step {} --threads {} --block-level {} "
      "--memory-budget {}{} --out-dir report",
      flags, m, p.step, p.thread_counts.empty() ? 1 : p.thread_counts.back(), p.block_level,
      p.memory_budget, o.with_benchmarks ? " --with-benchmarks" : ""));
  return cmds;
}

std::vector<LayerCondition> lc_table(const KernelIR& kernel, const WorkflowPlan& p) {
  return layer_conditions(kernel, p.machine, cube(p.spec, p.max_size())).conditions;
}

long plateau_start(const WorkflowPlan& p) {
  return p.l3_break.value_or(p.max_size());
}

ReportBundle finish(const WorkflowPlan& p, const WorkflowOptions& o, const KernelIR& kernel,
                    ReportTables tables, std::vector<std::string> notes, bool partial) {
  ReportBundle b;
  const auto rows = grid_rows(tables.grid);
  b.status = assess_status(rows, plateau_start(p), p.machine.overlap_policy);
  if (partial && b.status.status == Status::green) {
    b.status.status = Status::yellow;
    b.status.comment += " Capped at yellow: some rows failed.";
  }
  if (o.status_override) {
    b.status.status = *o.status_override;
    b.status.comment = o.status_comment.empty() ? "Status set manually." : o.status_comment;
  } else if (!o.status_comment.empty()) {
    b.status.comment += " " + o.status_comment;
  }
  b.plots = render_plots(tables, p.machine, p.spec.element_bytes());
  b.kernel_source = emit_c(kernel);
  b.tables = std::move(tables);
  b.notes = std::move(notes);

  HtmlInputs h;
  h.spec = p.spec;
  h.machine = p.machine;
  h.machine_file_text = o.machine_file_text.empty() ? serialize_machine(p.machine)
                                                    : o.machine_file_text;
  h.kernel_source = emit_kernel_source(kernel);
  h.layer_conditions = lc_table(kernel, p);
  h.commands = reproduction_commands(p, o);
  h.plots = b.plots;
  h.status = b.status;
  h.notes = b.notes;
  b.html = render_html(h);
  return b;
}

}  // namespace

std::uint64_t working_set_bytes(const KernelIR& kernel, long n) {
  const auto d = cube(kernel.spec, n);
  return static_cast<std::uint64_t>(2 + kernel.weight_components()) * d.bytes();
}

std::string cli_flags(const StencilSpec& s) {
  return fmt::format("--dim {} --radius {} --kind {} --weighting {} --coeff {} --dtype {}",
                     s.dimensions, s.radius, to_string(s.kind), to_string(s.weighting),
                     to_string(s.coefficients), to_string(s.element_type));
}

WorkflowPlan plan(const StencilSpec& spec, const MachineModel& machine,
                  std::uint64_t memory_budget, long step, std::string block_level) {
  if (step < 1) throw PlanningError(fmt::format("grid step must be positive, got {}", step));
  const auto kernel = build_kernel(spec);
  WorkflowPlan p;
  p.spec = spec;
  p.machine = machine;
  p.step = step;
  p.memory_budget = memory_budget;
  const auto& last = machine.cache_levels.back().name;
  p.block_level = block_level.empty() ? last : std::move(block_level);
  if (std::none_of(machine.cache_levels.begin(), machine.cache_levels.end(),
                   [&](const CacheLevelSpec& l) { return l.name == p.block_level; }))
    throw PlanningError(fmt::format("unknown blocking level '{}'", p.block_level));

  p.l3_break = lc_break_size(kernel, machine, last, top_dim(spec));
  if (!p.l3_break)
    throw PlanningError(fmt::format("the {} {} condition never breaks for {}", last,
                                    to_string(top_dim(spec)), spec.name()));
  constexpr long kFirst = 10;
  long n_max = std::max(kFirst, static_cast<long>(std::floor(1.5 * *p.l3_break)));
  n_max = kFirst + (n_max - kFirst) / step * step;
  while (n_max >= kFirst && working_set_bytes(kernel, n_max) > memory_budget) n_max -= step;
  if (n_max < kFirst)
    throw PlanningError(fmt::format("a {}^{} grid needs {} bytes, memory budget is {}", kFirst,
                                    spec.dimensions, working_set_bytes(kernel, kFirst),
                                    memory_budget));
  for (long n = kFirst; n <= n_max; n += step) p.sizes.push_back(n);
  for (int t = 1; t <= machine.cores_per_socket; ++t) p.thread_counts.push_back(t);

  const long min_axis = 2L * spec.radius + 2;
  for (const long n : p.sizes) {
    if (n < min_axis) continue;
    const auto b = lc_block_size(kernel, machine, p.block_level, n);
    if (b && *b < n) p.blocking.emplace_back(n, std::max(*b, min_axis));
  }
  return p;
}

ReportBundle run_workflow(const WorkflowPlan& p, const WorkflowOptions& o) {
  const auto kernel = build_kernel(p.spec);
  const auto eb = p.spec.element_bytes();
  const auto& m = p.machine;
  const auto links = link_names(m);
  std::vector<std::string> notes;
  bool partial = false;

  // Benchmarks first so that model rows can be merged in one pass.
  std::map<long, double> bench_cycles;
  if (o.with_benchmarks) {
    try {
      const auto sweep = grid_sweep(kernel, m, p.sizes, o.bench);
      for (const auto& w : sweep.warnings) notes.push_back("benchmark: " + w);
      for (const auto& e : sweep.entries) {
        if (e.result) {
          bench_cycles[e.size] = e.result->cycles_per_cl;
        } else {
          partial = true;
          notes.push_back(fmt::format("benchmark N={} failed: {}", e.size, e.error));
        }
      }
    } catch (const std::exception& e) {
      partial = true;
      notes.push_back(fmt::format("benchmark sweep failed: {}", e.what()));
    }
  }

  std::vector<GridRow> rows;
  CsvTable transfers{transfers_csv_header(m), {}};
  std::map<long, double> lc_total;
  for (const long n : p.sizes) {
    GridRow row;
    row.N = n;
    if (auto it = bench_cycles.find(n); it != bench_cycles.end()) row.benchmark_cycles = it->second;
    const auto dims = cube(p.spec, n);
    CsvRow trow{format_number(static_cast<double>(n))};
    try {
      dims.validate(p.spec);
      const auto lc = layer_conditions(kernel, m, dims).traffic;
      const auto e = ecm(kernel, m, lc);
      row.lc = ecm_columns(e, roofline(lc, m, e.T_comp(), eb));
      lc_total[n] = e.T_total;
      for (std::size_t i = 0; i < links.size(); ++i) {
        trow.push_back(format_number(lc.links[i].load_bytes));
        trow.push_back(format_number(lc.links[i].store_bytes));
      }
    } catch (const std::exception& e) {
      partial = true;
      notes.push_back(fmt::format("layer conditions N={}: {}", n, e.what()));
      trow.resize(1 + 2 * links.size());
    }
    if (dims.points() > o.simulation_budget) {
      notes.push_back(fmt::format("cache simulation skipped for N={}: {} points exceed the budget of {}",
                                  n, dims.points(), o.simulation_budget));
      trow.resize(1 + 4 * links.size());
    } else {
      try {
        SimulationOptions so;
        so.element_budget = o.simulation_budget;
        const auto cs = simulate_cache(kernel, m, dims, so).traffic;
        const auto e = ecm(kernel, m, cs);
        row.cs = ecm_columns(e, roofline(cs, m, e.T_comp(), eb));
        trow.resize(1 + 2 * links.size());
        for (std::size_t i = 0; i < links.size(); ++i) {
          trow.push_back(format_number(cs.links[i].load_bytes));
          trow.push_back(format_number(cs.links[i].store_bytes));
        }
      } catch (const std::exception& e) {
        partial = true;
        notes.push_back(fmt::format("cache simulation N={}: {}", n, e.what()));
        trow.resize(1 + 4 * links.size());
      }
    }
    rows.push_back(std::move(row));
    transfers.rows.push_back(std::move(trow));
  }

  ReportTables tables;
  tables.grid = grid_table(rows);
  tables.transfers = std::move(transfers);

  // Thread scaling at the largest size.
  {
    CsvTable threads{threads_csv_header(), {}};
    std::map<int, double> bench_mlups;
    const auto dims = cube(p.spec, p.max_size());
    if (o.with_benchmarks) {
      const int hw = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
      const int max_threads = std::min(hw, p.thread_counts.empty() ? 1 : p.thread_counts.back());
      if (max_threads < static_cast<int>(p.thread_counts.size()))
        notes.push_back(fmt::format("thread sweep limited to the {} hardware threads of this host",
                                    max_threads));
      try {
        const auto sweep = thread_sweep(kernel, m, dims, max_threads, o.bench);
        for (const auto& w : sweep.warnings) notes.push_back("thread sweep: " + w);
        for (const auto& e : sweep.entries) {
          if (e.result) bench_mlups[static_cast<int>(e.size)] = e.result->mlups;
          else notes.push_back(fmt::format("thread sweep {} threads failed: {}", e.size, e.error));
        }
      } catch (const std::exception& e) {
        partial = true;
        notes.push_back(fmt::format("thread sweep failed: {}", e.what()));
      }
    }
    try {
      const auto e = ecm(kernel, m, layer_conditions(kernel, m, dims).traffic);
      const auto s = scale_cores(e, m, eb, p.thread_counts.empty() ? 1 : p.thread_counts.back());
      for (const auto& pt : s.points) {
        std::optional<double> b;
        if (auto it = bench_mlups.find(pt.cores); it != bench_mlups.end()) b = it->second;
        threads.rows.push_back({format_number(pt.cores), format_number(pt.performance / 1e6),
                                format_optional(b)});
      }
      if (s.saturation_cores)
        notes.push_back(fmt::format("memory bandwidth saturates at {} cores per NUMA domain (N={})",
                                    *s.saturation_cores, p.max_size()));
    } catch (const std::exception& e) {
      partial = true;
      notes.push_back(fmt::format("thread scaling prediction failed: {}", e.what()));
    }
    tables.threads = std::move(threads);
  }

  // Blocking runs: the middle loop shortened to the block keeps the target
  // level's 3D condition satisfied.
  {
    CsvTable blocking{blocking_csv_header(), {}};
    for (const auto& [n, block] : p.blocking) {
      auto dims = cube(p.spec, n);
      auto blocked = dims;
      blocked.N = block;
      std::optional<double> naive, with_block, bench, bench_blocked;
      if (auto it = lc_total.find(n); it != lc_total.end()) naive = it->second;
      if (auto it = bench_cycles.find(n); it != bench_cycles.end()) bench = it->second;
      try {
        with_block = ecm(kernel, m, layer_conditions(kernel, m, blocked).traffic).T_total;
      } catch (const std::exception& e) {
        partial = true;
        notes.push_back(fmt::format("blocked layer conditions N={}: {}", n, e.what()));
      }
      if (o.with_benchmarks) {
        try {
          CodegenOptions cg;
          cg.blocking = BlockSpec{block};
          cg.dims = dims;
          bench_blocked = run_benchmark(kernel, cg, dims, m, o.bench).cycles_per_cl;
        } catch (const std::exception& e) {
          partial = true;
          notes.push_back(fmt::format("blocked benchmark N={} B={}: {}", n, block, e.what()));
        }
      }
      blocking.rows.push_back({format_number(static_cast<double>(n)),
                               format_number(static_cast<double>(block)), format_optional(naive),
                               format_optional(with_block), format_optional(bench),
                               format_optional(bench_blocked)});
    }
    if (p.blocking.empty())
      notes.push_back(fmt::format("no size needs blocking for the {} condition", p.block_level));
    tables.blocking = std::move(blocking);
  }

  if (!o.measurements.empty()) {
    CsvTable ph{phenomenological_csv_header(), {}};
    for (const auto& r : o.measurements) {
      try {
        const auto e = phenomenological_ecm(r, m);
        ph.rows.push_back({r.N ? format_number(static_cast<double>(*r.N)) : std::string(),
                           format_optional(e.terms.T_comp), format_optional(e.terms.T_RegL1),
                           format_optional(e.terms.T_L1L2), format_optional(e.terms.T_L2L3),
                           format_optional(e.terms.T_L3MEM),
                           format_optional(r.runtime_cycles_per_cl)});
      } catch (const std::exception& e) {
        partial = true;
        notes.push_back(fmt::format("phenomenological model: {}", e.what()));
      }
    }
    tables.phenomenological = std::move(ph);
  }

  if (!o.with_benchmarks) notes.push_back("benchmarks disabled: benchmark columns are empty");
  return finish(p, o, kernel, std::move(tables), std::move(notes), partial);
}

void write_bundle(const ReportBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_csv(dir / "data.csv", b.tables.grid, grid_csv_header());
  if (b.tables.transfers) write_csv(dir / "transfers.csv", *b.tables.transfers, b.tables.transfers->header);
  if (b.tables.threads) write_csv(dir / "threads.csv", *b.tables.threads, threads_csv_header());
  if (b.tables.blocking) write_csv(dir / "blocking.csv", *b.tables.blocking, blocking_csv_header());
  if (b.tables.phenomenological)
    write_csv(dir / "phenomenological.csv", *b.tables.phenomenological,
              phenomenological_csv_header());
  for (const auto& [name, svg] : b.plots.svgs) write_file(dir / name, svg);
  write_file(dir / "index.html", b.html);
  write_file(dir / "kernel.c", b.kernel_source);
}

ReportBundle rebuild_report(const std::filesystem::path& dir, const StencilSpec& spec,
                            const MachineModel& machine, const WorkflowOptions& options) {
  const auto kernel = build_kernel(spec);
  WorkflowPlan p;
  p.spec = spec;
  p.machine = machine;
  p.block_level = machine.cache_levels.back().name;
  p.l3_break = lc_break_size(kernel, machine, p.block_level, top_dim(spec));

  ReportTables t;
  t.grid = read_csv(dir / "data.csv");
  for (const auto& r : grid_rows(t.grid)) p.sizes.push_back(r.N);
  if (p.sizes.empty()) throw CsvError(fmt::format("{} has no rows", (dir / "data.csv").string()));
  if (p.sizes.size() > 1) p.step = p.sizes[1] - p.sizes[0];
  auto optional_table = [&](const char* name, const std::vector<std::string>& header)
      -> std::optional<CsvTable> {
    if (!std::filesystem::exists(dir / name)) return std::nullopt;
    auto table = read_csv(dir / name);
    if (table.header != header)
      throw CsvError(fmt::format("{} does not have the expected header", (dir / name).string()));
    return table;
  };
  t.transfers = optional_table("transfers.csv", transfers_csv_header(machine));
  t.threads = optional_table("threads.csv", threads_csv_header());
  t.blocking = optional_table("blocking.csv", blocking_csv_header());
  t.phenomenological = optional_table("phenomenological.csv", phenomenological_csv_header());
  if (t.threads && !t.threads->rows.empty())
    for (int c = 1; c <= static_cast<int>(t.threads->rows.size()); ++c) p.thread_counts.push_back(c);
  if (t.blocking)
    for (const auto& r : t.blocking->rows)
      p.blocking.emplace_back(std::stol(r[0]), std::stol(r[1]));

  bool partial = false;
  for (const auto& r : grid_rows(t.grid)) partial |= !r.lc;
  return finish(p, options, kernel, std::move(t), {}, partial);
}

}  // namespace sperf
