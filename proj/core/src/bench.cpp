#include "stencilperf/bench.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "stencilperf/csv.hpp"

namespace sperf {

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (const char c : s) {
    if (c == '\'') out += "'\\''"; else out += c;
  }
  return out + "'";
}

struct ProcessResult {
  int exit_code = -1;
  std::string output;
};

ProcessResult run_shell(const std::string& command) {
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) throw BenchError(fmt::format("cannot start '{}': {}", command, std::strerror(errno)));
  ProcessResult r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  if (status == -1) throw BenchError(fmt::format("cannot wait for '{}'", command));
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return r;
}

bool on_path(const std::string& program) {
  const char* path = std::getenv("PATH");
  if (!path) return false;
  std::stringstream ss(path);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) continue;
    std::error_code ec;
    const auto p = std::filesystem::path(dir) / program;
    if (std::filesystem::is_regular_file(p, ec)) return true;
  }
  return false;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw BenchError(fmt::format("cannot read '{}'", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path work_dir(const BenchOptions& options) {
  if (!options.work_dir.empty()) {
    std::filesystem::create_directories(options.work_dir);
    return options.work_dir;
  }
  auto tmpl = (std::filesystem::temp_directory_path() / "stencilperf-XXXXXX").string();
  if (!mkdtemp(tmpl.data()))
    throw BenchError(fmt::format("cannot create a temporary directory: {}", std::strerror(errno)));
  return tmpl;
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

double to_double(const std::string& text, const std::string& what) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE)
    throw BenchError(fmt::format("{}: '{}' is not a number", what, text));
  return v;
}

}  // namespace

std::string compiler_template_from_env() {
  const char* v = std::getenv(kCompilerTemplateEnv);
  return v && *v ? std::string(v) : std::string(kDefaultCompilerTemplate);
}

std::map<std::string, std::string> parse_benchmark_output(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == 0 || eq == std::string_view::npos)
      throw BenchError(fmt::format("unparseable benchmark output line: '{}'", line));
    kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  for (const auto* key : {"sweeps", "wall_s", "wall_s_mean", "cycles_per_cl", "mlups", "checksum"})
    if (!kv.count(key)) throw BenchError(fmt::format("benchmark output lacks '{}='", key));
  return kv;
}

CompiledBenchmark::CompiledBenchmark(std::filesystem::path binary, int dimensions, bool openmp,
                                     std::optional<BlockSpec> block)
    : binary_(std::move(binary)), dimensions_(dimensions), openmp_(openmp), block_(block) {}

BenchmarkResult CompiledBenchmark::run(const GridDims& dims, const MachineModel& machine,
                                       const BenchOptions& options) const {
  if (options.threads < 1) throw BenchError("thread count must be at least 1");
  if (options.threads > 1 && !openmp_)
    throw BenchError("more than one thread requested for a benchmark built without OpenMP");
  if (options.threads > machine.cores_per_socket)
    throw BenchError(fmt::format("{} threads exceed the {} cores of '{}'", options.threads,
                                 machine.cores_per_socket, machine.name));
  BenchmarkResult r;
  r.dims = dims;
  r.threads = options.threads;
  r.block = block_;

  std::string env;
  if (openmp_) {
    env += fmt::format("OMP_NUM_THREADS={} ", options.threads);
    if (options.pin) env += "OMP_PLACES=cores OMP_PROC_BIND=close ";
  } else if (options.pin) {
    if (on_path("taskset")) env += "taskset -c 0 ";
    else r.warnings.push_back("taskset not found; running unpinned");
  }
  std::string args = dimensions_ == 3 ? fmt::format("{} {} {}", dims.M, dims.N, dims.P)
                                      : fmt::format("{} {}", dims.N, dims.P);
  args += fmt::format(" {} {} {}", options.min_runtime_s, machine.clock_hz, options.seed);

  const auto err_path = binary_.string() + ".stderr";
  const auto cmd = fmt::format("{}{} {} 2>{}", env, shell_quote(binary_.string()), args,
                               shell_quote(err_path));
  const auto pr = run_shell(cmd);
  std::string err;
  if (std::filesystem::exists(err_path)) err = read_file(err_path);
  if (pr.exit_code != 0)
    throw BenchError(fmt::format("benchmark exited with status {}: {}{}", pr.exit_code, cmd,
                                 err.empty() ? "" : "\n" + err));
  const auto kv = parse_benchmark_output(pr.output);
  r.sweeps = static_cast<long>(to_double(kv.at("sweeps"), "sweeps"));
  r.wall_s = to_double(kv.at("wall_s"), "wall_s");
  r.wall_s_mean = to_double(kv.at("wall_s_mean"), "wall_s_mean");
  r.cycles_per_cl = to_double(kv.at("cycles_per_cl"), "cycles_per_cl");
  r.mlups = to_double(kv.at("mlups"), "mlups");
  r.checksum = to_double(kv.at("checksum"), "checksum");
  return r;
}

CompiledBenchmark compile_benchmark(const std::string& source, const KernelIR& kernel,
                                    const CodegenOptions& codegen, const MachineModel& machine,
                                    const BenchOptions& options) {
  const auto& tmpl = options.compiler_template;
  if (tmpl.find("{source}") == std::string::npos || tmpl.find("{output}") == std::string::npos)
    throw BenchError(
        fmt::format("compiler template '{}' needs {{source}} and {{output}} placeholders", tmpl));
  const auto dir = work_dir(options);
  std::string stem = kernel.spec.name();
  if (codegen.openmp) stem += "-omp";
  if (codegen.blocking) stem += fmt::format("-b{}", codegen.blocking->size);
  const auto src = dir / (stem + ".c");
  const auto bin = dir / stem;
  {
    std::ofstream out(src, std::ios::binary);
    out << source;
    if (!out) throw BenchError(fmt::format("cannot write '{}'", src.string()));
  }
  std::string flags = machine.compiler_flags;
  if (codegen.openmp) flags += " -fopenmp";
  if (!options.extra_flags.empty()) flags += " " + options.extra_flags;
  std::string cmd = tmpl;
  replace_all(cmd, "{flags}", flags);
  replace_all(cmd, "{output}", shell_quote(bin.string()));
  replace_all(cmd, "{source}", shell_quote(src.string()));
  const auto pr = run_shell(cmd + " 2>&1");
  if (pr.exit_code == 127)
    throw BenchError(fmt::format("compiler not found; command was: {}\n{}", cmd, pr.output));
  if (pr.exit_code != 0)
    throw BenchError(fmt::format("compilation failed (status {}): {}\n{}", pr.exit_code, cmd,
                                 pr.output));
  return CompiledBenchmark(bin, kernel.spec.dimensions, codegen.openmp, codegen.blocking);
}

BenchmarkResult run_benchmark(const KernelIR& kernel, const CodegenOptions& codegen,
                              const GridDims& dims, const MachineModel& machine,
                              const BenchOptions& options) {
  const auto compiled =
      compile_benchmark(emit_c(kernel, codegen), kernel, codegen, machine, options);
  return compiled.run(dims, machine, options);
}

SweepResult grid_sweep(const KernelIR& kernel, const MachineModel& machine,
                       const std::vector<long>& sizes, const BenchOptions& options,
                       const CodegenOptions& codegen) {
  if (sizes.empty()) throw BenchError("grid sweep needs at least one size");
  SweepResult out;
  std::vector<long> uniq;
  std::set<long> seen;
  for (const long n : sizes) {
    if (!seen.insert(n).second) {
      out.warnings.push_back(fmt::format("duplicate size {} dropped", n));
      continue;
    }
    uniq.push_back(n);
  }
  if (!std::is_sorted(uniq.begin(), uniq.end())) {
    out.warnings.push_back("sizes were not ascending; sorted");
    std::sort(uniq.begin(), uniq.end());
  }
  const auto compiled =
      compile_benchmark(emit_c(kernel, codegen), kernel, codegen, machine, options);
  bool any = false;
  for (const long n : uniq) {
    SweepEntry e;
    e.size = n;
    try {
      GridDims d;
      d.element_bytes = kernel.spec.element_bytes();
      d.M = kernel.spec.dimensions == 3 ? n : 1;
      d.N = d.P = n;
      e.result = compiled.run(d, machine, options);
      any = true;
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    out.entries.push_back(std::move(e));
  }
  if (!any) {
    std::string why;
    for (const auto& e : out.entries) why += fmt::format("\n  N={}: {}", e.size, e.error);
    throw BenchError("every size of the grid sweep failed:" + why);
  }
  return out;
}

SweepResult thread_sweep(const KernelIR& kernel, const MachineModel& machine, const GridDims& dims,
                         int max_threads, const BenchOptions& options,
                         const CodegenOptions& codegen) {
  if (max_threads < 1 || max_threads > machine.cores_per_socket)
    throw BenchError(fmt::format("thread count {} outside 1..{} for '{}'", max_threads,
                                 machine.cores_per_socket, machine.name));
  auto cg = codegen;
  cg.openmp = true;
  const auto compiled = compile_benchmark(emit_c(kernel, cg), kernel, cg, machine, options);
  SweepResult out;
  bool any = false;
  double prev = 0;
  for (int t = 1; t <= max_threads; ++t) {
    SweepEntry e;
    e.size = t;
    auto o = options;
    o.threads = t;
    try {
      e.result = compiled.run(dims, machine, o);
      any = true;
      if (e.result->mlups < prev)
        out.warnings.push_back(fmt::format("performance drops from {:.1f} to {:.1f} MLUP/s at {} threads",
                                           prev, e.result->mlups, t));
      prev = std::max(prev, e.result->mlups);
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    out.entries.push_back(std::move(e));
  }
  if (!any) throw BenchError("every run of the thread sweep failed");
  return out;
}

namespace {

const std::set<std::string>& record_fields() {
  static const std::set<std::string> f{"N",
                                       "l1l2_load_bytes",
                                       "l1l2_store_bytes",
                                       "l2l3_load_bytes",
                                       "l2l3_store_bytes",
                                       "mem_load_bytes",
                                       "mem_store_bytes",
                                       "runtime_cycles_per_cl"};
  return f;
}

}  // namespace

CounterMapping parse_counter_mapping(std::string_view yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw BenchError(fmt::format("counter mapping does not parse: {}", e.what()));
  }
  if (!root.IsMap()) throw BenchError("counter mapping: expected a mapping");
  CounterMapping m;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (key == "provenance") {
      m.provenance = kv.second.as<std::string>();
    } else if (key == "work_cachelines_column") {
      m.work_cachelines_column = kv.second.as<std::string>();
    } else if (key == "ignore") {
      if (!kv.second.IsSequence()) throw BenchError("counter mapping: ignore must be a list");
      for (const auto& n : kv.second) m.ignore.push_back(n.as<std::string>());
    } else if (key == "columns") {
      if (!kv.second.IsMap()) throw BenchError("counter mapping: columns must be a mapping");
      for (const auto& c : kv.second) {
        const auto name = c.first.as<std::string>();
        CounterMapping::Column col;
        if (c.second.IsScalar()) {
          col.field = c.second.as<std::string>();
        } else {
          for (const auto& f : c.second) {
            const auto k = f.first.as<std::string>();
            if (k == "field") {
              col.field = f.second.as<std::string>();
            } else if (k == "scale") {
              try {
                col.scale = f.second.as<double>();
              } catch (const YAML::Exception&) {
                throw BenchError(fmt::format("columns.{}.scale: not a number", name));
              }
            } else {
              throw BenchError(fmt::format("columns.{}.{}: unknown key", name, k));
            }
          }
        }
        if (!record_fields().count(col.field) && col.field.rfind("port:", 0) != 0)
          throw BenchError(fmt::format("columns.{}: unknown record field '{}'", name, col.field));
        m.columns[name] = col;
      }
    } else {
      throw BenchError(fmt::format("counter mapping: unknown key '{}'", key));
    }
  }
  if (m.columns.empty()) throw BenchError("counter mapping maps no columns");
  return m;
}

CounterMapping load_counter_mapping(const std::filesystem::path& path) {
  return parse_counter_mapping(read_file(path));
}

std::vector<MeasurementRecord> parse_counters(std::string_view csv_text,
                                              const CounterMapping& mapping) {
  if (csv_text.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw BenchError("counter file is empty");
  CsvTable t;
  try {
    t = parse_csv(csv_text);
  } catch (const CsvError& e) {
    throw BenchError(fmt::format("counter file: {}", e.what()));
  }
  if (t.rows.empty()) throw BenchError("counter file has a header but no rows");

  std::vector<std::string> unknown;
  for (const auto& h : t.header) {
    const bool known = mapping.columns.count(h) ||
                       (mapping.work_cachelines_column && *mapping.work_cachelines_column == h) ||
                       std::find(mapping.ignore.begin(), mapping.ignore.end(), h) !=
                           mapping.ignore.end();
    if (!known) unknown.push_back(h);
  }
  if (!unknown.empty())
    throw BenchError(fmt::format("counter columns without mapping: {}", fmt::join(unknown, ", ")));
  std::optional<std::size_t> work_col;
  if (mapping.work_cachelines_column) {
    const auto& h = t.header;
    const auto it = std::find(h.begin(), h.end(), *mapping.work_cachelines_column);
    if (it == h.end())
      throw BenchError(fmt::format("counter file lacks the work column '{}'",
                                   *mapping.work_cachelines_column));
    work_col = static_cast<std::size_t>(it - h.begin());
  }

  std::vector<MeasurementRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    MeasurementRecord rec;
    rec.provenance = mapping.provenance;
    double work = 1.0;
    if (work_col && !row[*work_col].empty()) {
      work = to_double(row[*work_col], fmt::format("row {} column {}", r + 1,
                                                   *mapping.work_cachelines_column));
      if (!(work > 0)) throw BenchError(fmt::format("row {}: work cachelines must be positive", r + 1));
    }
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      const auto it = mapping.columns.find(t.header[c]);
      if (it == mapping.columns.end() || row[c].empty()) continue;
      const auto& col = it->second;
      const double raw = to_double(row[c], fmt::format("row {} column {}", r + 1, t.header[c]));
      if (col.field == "N") {
        rec.N = static_cast<long>(raw);
        continue;
      }
      const double v = raw * col.scale / work;
      if (col.field == "l1l2_load_bytes") rec.l1l2_load_bytes = v;
      else if (col.field == "l1l2_store_bytes") rec.l1l2_store_bytes = v;
      else if (col.field == "l2l3_load_bytes") rec.l2l3_load_bytes = v;
      else if (col.field == "l2l3_store_bytes") rec.l2l3_store_bytes = v;
      else if (col.field == "mem_load_bytes") rec.mem_load_bytes = v;
      else if (col.field == "mem_store_bytes") rec.mem_store_bytes = v;
      else if (col.field == "runtime_cycles_per_cl") rec.runtime_cycles_per_cl = v;
      else rec.port_uops[col.field.substr(5)] = v;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<MeasurementRecord> ingest_counters(const std::filesystem::path& csv_path,
                                               const CounterMapping& mapping) {
  return parse_counters(read_file(csv_path), mapping);
}

}  // namespace sperf
