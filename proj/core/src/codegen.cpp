#include "stencilperf/codegen.hpp"

#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>

namespace sperf {

namespace {

constexpr std::string_view kHarness = R"(/* {{TITLE}} */
#define _POSIX_C_SOURCE 200112L
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <time.h>
{{MARKER_HEADER}}

typedef {{DTYPE}} real_t;

#define RADIUS {{RADIUS}}
#define LINE_BYTES {{LINE_SIZE}}
{{BLOCK_DEFINE}}

static uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

static real_t init_value(uint64_t seed, uint64_t array_id, uint64_t idx) {
  const uint64_t h = mix64(seed ^ (array_id << 56) ^ mix64(idx));
  return (real_t)((double)(h >> 11) * 0x1.0p-53);
}

static double now(void) {
  struct timespec ts;
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return (double)ts.tv_sec + 1e-9 * (double)ts.tv_nsec;
}

static real_t *alloc_grid(size_t count) {
  void *p = NULL;
  size_t bytes = count * sizeof(real_t);
  bytes = (bytes + LINE_BYTES - 1) / LINE_BYTES * LINE_BYTES;
  if (posix_memalign(&p, LINE_BYTES, bytes) != 0) {
    fprintf(stderr, "error=allocation of %lu bytes failed\n", (unsigned long)bytes);
    exit(4);
  }
  return (real_t *)p;
}

/* First touch in the same order as the compute loop nest. */
static void init(const long M, const long N, const long P, const uint64_t seed,
                 {{INIT_PARAMS}}) {
  (void)M;
{{INIT_BODY}}
}

static void kernel(const long M, const long N, const long P,
                   {{KERNEL_PARAMS}}) {
  (void)M;
{{KERNEL_BODY}}
}

int main(int argc, char **argv) {
{{DIM_PARSE}}
  const double min_runtime = argc > argi ? atof(argv[argi]) : 1.0;
  const double clock_hz = argc > argi + 1 ? atof(argv[argi + 1]) : 0.0;
  const uint64_t seed = argc > argi + 2 ? (uint64_t)strtoull(argv[argi + 2], NULL, 10) : 1;
  if ((M != 1 && M < 2 * RADIUS + 2) || N < 2 * RADIUS + 2 || P < 2 * RADIUS + 2) {
    fprintf(stderr, "error=grid %ldx%ldx%ld too small for radius %d\n", M, N, P, RADIUS);
    return 3;
  }
{{BLOCK_CHECK}}
{{ALLOC}}
  init(M, N, P, seed, {{INIT_ARGS}});
{{MARKER_INIT}}

  double best = 1e300, total = 0.0;
  long sweeps = 0;
  do {
    const double t0 = now();
{{MARKER_BEGIN}}
    kernel(M, N, P, {{KERNEL_ARGS}});
{{MARKER_END}}
    const double t = now() - t0;
    if (t < best) best = t;
    total += t;
    ++sweeps;
  } while (total < min_runtime);
{{MARKER_CLOSE}}

  double checksum = 0.0;
  for (long n = 0; n < M * N * P; ++n) checksum += (double){{CHECKSUM_ARRAY}}[n];
  const double interior =
      (double)(M == 1 ? 1 : M - 2 * RADIUS) * (double)(N - 2 * RADIUS) * (double)(P - 2 * RADIUS);
  const double lup_per_cl = (double)LINE_BYTES / (double)sizeof(real_t);
  printf("sweeps=%ld\n", sweeps);
  printf("wall_s=%.9e\n", best);
  printf("wall_s_mean=%.9e\n", total / (double)sweeps);
  printf("cycles_per_cl=%.9e\n", best * clock_hz / (interior / lup_per_cl));
  printf("mlups=%.9e\n", interior / best / 1e6);
  printf("checksum=%.17g\n", checksum);
{{FREE}}
  return 0;
}
)";

constexpr std::string_view kMarkerHeader = R"(#ifdef LIKWID_PERFMON
#include <likwid-marker.h>
#else
#define LIKWID_MARKER_INIT
#define LIKWID_MARKER_REGISTER(tag)
#define LIKWID_MARKER_START(tag)
#define LIKWID_MARKER_STOP(tag)
#define LIKWID_MARKER_CLOSE
#endif)";

bool is_3d(const KernelIR& k) { return k.spec.dimensions == 3; }

std::string index_expr(char var, int offset) {
  if (offset == 0) return std::string(1, var);
  return fmt::format("{}{}{}", var, offset > 0 ? '+' : '-', offset > 0 ? offset : -offset);
}

std::string grid_index(const KernelIR& k, const Offset& o) {
  if (is_3d(k))
    return fmt::format("[{}][{}][{}]", index_expr('k', o[0]), index_expr('j', o[1]),
                       index_expr('i', o[2]));
  return fmt::format("[{}][{}]", index_expr('j', o[1]), index_expr('i', o[2]));
}

std::string read_access(const KernelIR& k, const OffsetTerm& t) {
  return t.array + grid_index(k, t.offset);
}

std::string coefficient_access(const KernelIR& k, std::size_t c) {
  if (k.variable_coefficients()) return k.coefficients[c] + grid_index(k, {0, 0, 0});
  return k.coefficients[c];
}

std::string assignment(const KernelIR& k, std::string_view indent) {
  const std::string lhs = k.write_array + grid_index(k, {0, 0, 0}) + " = ";
  const std::string cont = std::string(indent) + "    + ";
  std::vector<std::string> parts;
  const bool homogeneous = k.spec.weighting == Weighting::homogeneous;
  for (const auto& t : k.terms) {
    parts.push_back(homogeneous ? read_access(k, t)
                                : coefficient_access(k, t.coefficient.index) + " * " +
                                      read_access(k, t));
  }
  std::string out = lhs;
  if (homogeneous) out += coefficient_access(k, 0) + " * (";
  out += parts.front();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    out += (p % 2 == 1) ? "\n" + cont : " + ";
    out += parts[p];
  }
  out += homogeneous ? ");" : ";";
  return out;
}

// Emits a loop nest over either the interior (compute) or the full grid
// (first-touch init). The blocked form tiles the middle loop only.
std::string loop_nest(const KernelIR& k, const CodegenOptions& opt, bool full_range,
                      const std::string& body) {
  const int r = k.spec.radius;
  auto lo = [&](void) { return full_range ? std::string("0") : std::to_string(r); };
  auto hi = [&](char axis) {
    return full_range ? std::string(1, axis) : fmt::format("{} - {}", axis, r);
  };
  std::ostringstream s;
  std::string ind = "  ";
  std::vector<std::string> closers;
  auto open = [&](const std::string& header) {
    s << ind << header << " {\n";
    closers.push_back(ind + "}\n");
    ind += "  ";
  };
  if (opt.openmp) s << "#pragma omp parallel for schedule(static)\n";
  if (opt.blocking) {
    open(fmt::format("for (long jb = {}; jb < {}; jb += BLOCK_J)", lo(), hi('N')));
    s << ind << fmt::format("const long jend = jb + BLOCK_J < {0} ? jb + BLOCK_J : {0};\n",
                            hi('N'));
    if (is_3d(k)) open(fmt::format("for (long k = {}; k < {}; ++k)", lo(), hi('M')));
    open("for (long j = jb; j < jend; ++j)");
  } else {
    if (is_3d(k)) open(fmt::format("for (long k = {}; k < {}; ++k)", lo(), hi('M')));
    open(fmt::format("for (long j = {}; j < {}; ++j)", lo(), hi('N')));
  }
  open(fmt::format("for (long i = {}; i < {}; ++i)", lo(), hi('P')));
  std::istringstream lines(body);
  for (std::string line; std::getline(lines, line);) s << ind << line << "\n";
  for (auto it = closers.rbegin(); it != closers.rend(); ++it) s << *it;
  std::string out = s.str();
  out.pop_back();
  return out;
}

std::string grid_param(const KernelIR& k, const std::string& name) {
  return is_3d(k) ? fmt::format("real_t (*restrict {})[N][P]", name)
                  : fmt::format("real_t (*restrict {})[P]", name);
}

std::string weight_param(const KernelIR& k) {
  return is_3d(k) ? fmt::format("real_t (*restrict {})[M][N][P]", k.weight_array)
                  : fmt::format("real_t (*restrict {})[N][P]", k.weight_array);
}

std::string coefficient_param(const KernelIR& k) {
  return k.variable_coefficients() ? weight_param(k) : "const real_t *restrict coef";
}

std::string cast_decl(const KernelIR& k, const std::string& name, bool weight) {
  if (weight) {
    return is_3d(k) ? fmt::format("  real_t (*{0})[M][N][P] = (real_t (*)[M][N][P]){0}_mem;",
                                  name)
                    : fmt::format("  real_t (*{0})[N][P] = (real_t (*)[N][P]){0}_mem;", name);
  }
  return is_3d(k) ? fmt::format("  real_t (*{0})[N][P] = (real_t (*)[N][P]){0}_mem;", name)
                  : fmt::format("  real_t (*{0})[P] = (real_t (*)[P]){0}_mem;", name);
}

}  // namespace

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& substitutions) {
  std::set<std::string> used;
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find("}}", open);
    if (close == std::string_view::npos)
      throw RenderError(fmt::format("unterminated placeholder at offset {}", open));
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    const auto it = substitutions.find(name);
    if (it == substitutions.end())
      throw RenderError(fmt::format("no substitution for placeholder '{}'", name));
    if (!used.insert(name).second)
      throw RenderError(fmt::format("placeholder '{}' appears more than once", name));

    // A placeholder alone on its line with an empty value removes the line.
    const auto line_start = out.rfind('\n');
    const bool alone_before =
        out.find_first_not_of(' ', line_start == std::string::npos ? 0 : line_start + 1) ==
        std::string::npos;
    const bool alone_after = close + 2 >= tmpl.size() || tmpl[close + 2] == '\n';
    if (it->second.empty() && alone_before && alone_after) {
      out.erase(line_start == std::string::npos ? 0 : line_start + 1);
      pos = close + 3;
      continue;
    }
    out.append(it->second);
    pos = close + 2;
  }
  for (const auto& [name, value] : substitutions) {
    if (!used.count(name)) throw RenderError(fmt::format("substitution '{}' is unused", name));
  }
  return out;
}

std::string_view harness_template() { return kHarness; }

std::string emit_assignment(const KernelIR& kernel) { return assignment(kernel, ""); }

std::string emit_kernel_source(const KernelIR& k) {
  const std::string type =
      k.spec.element_type == ElementType::float64 ? "double" : "float";
  const std::string shape = is_3d(k) ? "[M][N][P]" : "[N][P]";
  std::string decl = fmt::format("{0} {1}{2}, {3}{2}", type, k.read_array, shape, k.write_array);
  if (k.variable_coefficients()) {
    decl += fmt::format(", {}[{}]{}", k.weight_array, k.coefficients.size(), shape);
  }
  decl += ";\n";
  if (!k.variable_coefficients()) {
    decl += type + " ";
    for (std::size_t c = 0; c < k.coefficients.size(); ++c) {
      decl += (c ? ", " : "") + k.coefficients[c];
    }
    decl += ";\n";
  }
  CodegenOptions plain;
  const std::string body = loop_nest(k, plain, false, assignment(k, ""));
  // The snippet is written without the leading indentation of a function body.
  std::istringstream lines(body);
  std::string out = decl + "\n";
  for (std::string line; std::getline(lines, line);) out += line.substr(2) + "\n";
  return out;
}

std::string emit_c(const KernelIR& k, const CodegenOptions& opt) {
  if (opt.blocking && opt.blocking->size < 1)
    throw SpecError(fmt::format("block size must be at least 1, got {}", opt.blocking->size));
  if (opt.blocking && !is_3d(k) && opt.dims && opt.blocking->size >= opt.dims->N)
    throw SpecError(fmt::format("degenerate 2D tile: block size {} is not smaller than N = {}",
                                opt.blocking->size, opt.dims->N));
  if (opt.line_size <= 0 || opt.line_size % static_cast<int>(k.spec.element_bytes()) != 0)
    throw SpecError(fmt::format("line size {} is not a multiple of the element size",
                                opt.line_size));

  const std::string w = k.write_array;
  const std::string rd = k.read_array;
  const bool var = k.variable_coefficients();

  std::string params = grid_param(k, rd) + ", " + grid_param(k, w) + ",\n                   " +
                       coefficient_param(k);
  std::string init_params =
      grid_param(k, rd) + ", " + grid_param(k, w) + (var ? ",\n                 " +
                                                               weight_param(k) : "");

  // Kernel body: scalar coefficient locals, then the loop nest.
  std::string kernel_body;
  if (!var) {
    for (std::size_t c = 0; c < k.coefficients.size(); ++c)
      kernel_body += fmt::format("  const real_t {} = coef[{}];\n", k.coefficients[c], c);
  }
  kernel_body += loop_nest(k, opt, false, assignment(k, ""));

  std::string init_stmt = is_3d(k) ? "const uint64_t idx = (uint64_t)((k * N + j) * P + i);\n"
                                   : "const uint64_t idx = (uint64_t)(j * P + i);\n";
  const std::string here = grid_index(k, {0, 0, 0});
  init_stmt += fmt::format("{0}{1} = init_value(seed, 0, idx);\n{2}{1} = {0}{1};", rd, here, w);
  if (var) {
    init_stmt += fmt::format("\nfor (int c = 0; c < {}; ++c) {}[c]{} = init_value(seed, 2 + c, idx);",
                             k.coefficients.size(), k.weight_array, here);
  }
  const std::string init_body = loop_nest(k, opt, true, init_stmt);

  std::string dim_parse;
  if (is_3d(k)) {
    dim_parse =
        "  if (argc < 4) {\n"
        "    fprintf(stderr, \"usage: %s M N P [min_runtime_s] [clock_hz] [seed]\\n\", argv[0]);\n"
        "    return 2;\n"
        "  }\n"
        "  const long M = atol(argv[1]), N = atol(argv[2]), P = atol(argv[3]);\n"
        "  const int argi = 4;";
  } else {
    dim_parse =
        "  if (argc < 3) {\n"
        "    fprintf(stderr, \"usage: %s N P [min_runtime_s] [clock_hz] [seed]\\n\", argv[0]);\n"
        "    return 2;\n"
        "  }\n"
        "  const long M = 1, N = atol(argv[1]), P = atol(argv[2]);\n"
        "  const int argi = 3;";
  }

  std::string alloc = fmt::format("  real_t *{0}_mem = alloc_grid((size_t)(M * N * P));\n"
                                  "  real_t *{1}_mem = alloc_grid((size_t)(M * N * P));\n",
                                  rd, w);
  std::string free_list = fmt::format("  free({}_mem);\n  free({}_mem);", rd, w);
  if (var) {
    alloc += fmt::format("  real_t *{}_mem = alloc_grid((size_t)({} * M * N * P));\n",
                         k.weight_array, k.coefficients.size());
    free_list += fmt::format("\n  free({}_mem);", k.weight_array);
  }
  alloc += cast_decl(k, rd, false) + "\n" + cast_decl(k, w, false);
  if (var) alloc += "\n" + cast_decl(k, k.weight_array, true);
  if (!var) {
    alloc += fmt::format("\n  real_t coef[{}];\n  for (int c = 0; c < {}; ++c) coef[c] = (real_t)(1.0 / (double)(c + 2));",
                         k.coefficients.size(), k.coefficients.size());
  }

  std::string block_define;
  std::string block_check;
  if (opt.blocking) {
    block_define = fmt::format("#define BLOCK_J {}", opt.blocking->size);
    if (!is_3d(k)) {
      block_check =
          "  if (BLOCK_J >= N) {\n"
          "    fprintf(stderr, \"error=degenerate tile: block %d is not smaller than N = %ld\\n\", "
          "BLOCK_J, N);\n"
          "    return 3;\n"
          "  }";
    }
  }

  const std::string coef_arg = var ? k.weight_array : "coef";
  std::map<std::string, std::string> subs{
      {"TITLE", fmt::format("Generated stencil benchmark: {}", k.spec.name())},
      {"MARKER_HEADER", opt.markers ? std::string(kMarkerHeader) : ""},
      {"DTYPE", k.spec.element_type == ElementType::float64 ? "double" : "float"},
      {"RADIUS", std::to_string(k.spec.radius)},
      {"LINE_SIZE", std::to_string(opt.line_size)},
      {"BLOCK_DEFINE", block_define},
      {"INIT_PARAMS", init_params},
      {"INIT_BODY", init_body},
      {"KERNEL_PARAMS", params},
      {"KERNEL_BODY", kernel_body},
      {"DIM_PARSE", dim_parse},
      {"BLOCK_CHECK", block_check},
      {"ALLOC", alloc},
      {"INIT_ARGS", fmt::format("{}, {}{}", rd, w, var ? ", " + k.weight_array : "")},
      {"KERNEL_ARGS", fmt::format("{}, {}, {}", rd, w, coef_arg)},
      {"MARKER_INIT", opt.markers ? "  LIKWID_MARKER_INIT;\n  LIKWID_MARKER_REGISTER(\"stencil\");"
                                  : ""},
      {"MARKER_BEGIN",
       !opt.markers ? ""
       : opt.openmp ? "#pragma omp parallel\n    { LIKWID_MARKER_START(\"stencil\"); }"
                    : "    LIKWID_MARKER_START(\"stencil\");"},
      {"MARKER_END",
       !opt.markers ? ""
       : opt.openmp ? "#pragma omp parallel\n    { LIKWID_MARKER_STOP(\"stencil\"); }"
                    : "    LIKWID_MARKER_STOP(\"stencil\");"},
      {"MARKER_CLOSE", opt.markers ? "  LIKWID_MARKER_CLOSE;" : ""},
      {"CHECKSUM_ARRAY", w + "_mem"},
      {"FREE", free_list},
  };
  return render_template(kHarness, subs);
}

}  // namespace sperf
