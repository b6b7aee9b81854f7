#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stencilperf/codegen.hpp"
#include "stencilperf/machine.hpp"
#include "stencilperf/perf_model.hpp"
#include "stencilperf/stencil.hpp"

namespace sperf {

class BenchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kDefaultCompilerTemplate =
    "cc -std=c99 -O3 -ffp-contract=off {flags} -o {output} {source}";
inline constexpr const char* kCompilerTemplateEnv = "STENCILPERF_CC_TEMPLATE";

/// The compiler template from the environment override, else the default.
std::string compiler_template_from_env();

struct BenchOptions {
  std::string compiler_template = std::string(kDefaultCompilerTemplate);
  std::string extra_flags;
  double min_runtime_s = 1.0;
  std::uint64_t seed = 1;
  int threads = 1;
  bool pin = true;
  /// Where sources and binaries go; a fresh temporary directory when empty.
  std::filesystem::path work_dir;
};

struct BenchmarkResult {
  GridDims dims;
  int threads = 1;
  std::optional<BlockSpec> block;
  long sweeps = 0;
  double wall_s = 0;  // fastest sweep
  double wall_s_mean = 0;
  double cycles_per_cl = 0;
  double mlups = 0;
  double checksum = 0;
  std::vector<std::string> warnings;
};

/// Parses the `key=value` lines of a benchmark binary. Throws BenchError
/// quoting the first line that does not parse or a missing key.
std::map<std::string, std::string> parse_benchmark_output(std::string_view text);

/// A compiled benchmark binary; runs it for any grid extents.
class CompiledBenchmark {
 public:
  CompiledBenchmark(std::filesystem::path binary, int dimensions, bool openmp,
                    std::optional<BlockSpec> block);

  BenchmarkResult run(const GridDims& dims, const MachineModel& machine,
                      const BenchOptions& options) const;
  const std::filesystem::path& binary() const { return binary_; }

 private:
  std::filesystem::path binary_;
  int dimensions_;
  bool openmp_;
  std::optional<BlockSpec> block_;
};

/// Writes `source` to the work directory and compiles it with the template.
CompiledBenchmark compile_benchmark(const std::string& source, const KernelIR& kernel,
                                    const CodegenOptions& codegen, const MachineModel& machine,
                                    const BenchOptions& options);

/// Compile and run once.
BenchmarkResult run_benchmark(const KernelIR& kernel, const CodegenOptions& codegen,
                              const GridDims& dims, const MachineModel& machine,
                              const BenchOptions& options);

struct SweepEntry {
  long size = 0;  // cubic edge, or thread count for thread sweeps
  std::optional<BenchmarkResult> result;
  std::string error;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  std::vector<std::string> warnings;
};

/// One result per distinct size. A failing size is recorded and the sweep
/// continues; throws only if every size failed.
SweepResult grid_sweep(const KernelIR& kernel, const MachineModel& machine,
                       const std::vector<long>& sizes, const BenchOptions& options,
                       const CodegenOptions& codegen = {});

/// Runs 1..max_threads at fixed dims with compact pinning.
SweepResult thread_sweep(const KernelIR& kernel, const MachineModel& machine, const GridDims& dims,
                         int max_threads, const BenchOptions& options,
                         const CodegenOptions& codegen = {});

/// Maps counter-export columns onto MeasurementRecord fields.
struct CounterMapping {
  struct Column {
    std::string field;  // N, l1l2_load_bytes, ..., runtime_cycles_per_cl, port:<name>
    double scale = 1.0;
  };
  std::map<std::string, Column> columns;
  /// Column holding the number of cachelines of work; volumes, µops and
  /// runtime are divided by it when present.
  std::optional<std::string> work_cachelines_column;
  std::vector<std::string> ignore;
  std::string provenance = "counters";
};

CounterMapping load_counter_mapping(const std::filesystem::path& path);
CounterMapping parse_counter_mapping(std::string_view yaml_text);

/// One record per CSV row.
std::vector<MeasurementRecord> parse_counters(std::string_view csv_text,
                                              const CounterMapping& mapping);
std::vector<MeasurementRecord> ingest_counters(const std::filesystem::path& csv_path,
                                               const CounterMapping& mapping);

}  // namespace sperf
