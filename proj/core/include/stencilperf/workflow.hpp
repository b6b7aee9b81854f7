#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stencilperf/bench.hpp"
#include "stencilperf/layer_condition.hpp"
#include "stencilperf/machine.hpp"
#include "stencilperf/perf_model.hpp"
#include "stencilperf/report.hpp"
#include "stencilperf/stencil.hpp"

namespace sperf {

class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WorkflowPlan {
  StencilSpec spec;
  MachineModel machine;
  std::vector<long> sizes;  // cubic edges, 10, 10 + step, ...
  long step = 10;
  std::vector<int> thread_counts;
  std::string block_level;  // cache level the blocking targets
  /// (N, middle-loop block) for every size where blocking shortens the loop.
  std::vector<std::pair<long, long>> blocking;
  std::uint64_t memory_budget = 0;
  std::optional<long> l3_break;  // cubic N of the last level's 3D break

  long max_size() const { return sizes.empty() ? 0 : sizes.back(); }
};

/// Bytes of all arrays of the kernel on a cubic grid of edge n.
std::uint64_t working_set_bytes(const KernelIR& kernel, long n);

/// Sizes 10, 10 + step, ... up to 1.5 times the last level's 3D break, reduced
/// until every array fits the memory budget. Throws PlanningError if even the
/// first size does not fit.
WorkflowPlan plan(const StencilSpec& spec, const MachineModel& machine,
                  std::uint64_t memory_budget, long step = 10,
                  std::string block_level = {});

struct WorkflowOptions {
  bool with_benchmarks = false;
  BenchOptions bench;
  /// Grids larger than this many points per array are not simulated.
  std::size_t simulation_budget = std::size_t{1} << 20;
  /// Counter records; one per size enables the phenomenological plot.
  std::vector<MeasurementRecord> measurements;
  /// The command line that produced the run, shown verbatim in the page.
  std::string command_line;
  /// Machine file contents for the digest; serialized machine when empty.
  std::string machine_file_text;
  /// Machine file name used in the reproduction commands.
  std::string machine_file_name = "machine.yml";
  std::optional<Status> status_override;
  std::string status_comment;
};

struct ReportBundle {
  ReportTables tables;
  PlotSet plots;
  std::string html;
  std::string kernel_source;  // the complete benchmark translation unit
  StatusAssessment status;
  std::vector<std::string> notes;
};

/// The stencil flags of the CLI, e.g. "--dim 3 --radius 1 --kind star ...".
std::string cli_flags(const StencilSpec& spec);

ReportBundle run_workflow(const WorkflowPlan& plan, const WorkflowOptions& options = {});

/// Writes data.csv, the auxiliary CSVs, the SVGs, index.html and kernel.c.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& out_dir);

/// Rebuilds plots and page from CSVs previously written by write_bundle.
ReportBundle rebuild_report(const std::filesystem::path& dir, const StencilSpec& spec,
                            const MachineModel& machine, const WorkflowOptions& options = {});

}  // namespace sperf
