#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "stencilperf/stencil.hpp"

namespace sperf {

/// Spatial blocking of the middle loop (j in 3D, the outer loop in 2D).
struct BlockSpec {
  long size = 64;
  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct CodegenOptions {
  bool openmp = false;
  bool markers = false;
  std::optional<BlockSpec> blocking;
  /// Only used to reject degenerate 2D tiles at generation time.
  std::optional<GridDims> dims;
  /// Cache line size baked into the cycles-per-cacheline conversion.
  int line_size = 64;
};

class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Replaces every `{{NAME}}` in `tmpl`. Fails if a placeholder has no value,
/// appears more than once, or a provided value is never used.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& substitutions);

/// The benchmark skeleton the emitter fills in.
std::string_view harness_template();

/// The kernel as a short declaration-plus-loop-nest snippet (no harness).
std::string emit_kernel_source(const KernelIR& kernel);

/// The update statement alone, e.g. "b[k][j][i] = c0 * (a[k][j][i] + ...);".
std::string emit_assignment(const KernelIR& kernel);

/// A complete, stand-alone C99 benchmark translation unit.
///
/// The binary takes the grid extents (M N P, or N P in 2D) followed by an
/// optional minimal runtime in seconds, the clock in Hz and the init seed. It
/// prints `key=value` lines: sweeps, wall_s, wall_s_mean, cycles_per_cl,
/// mlups and checksum.
std::string emit_c(const KernelIR& kernel, const CodegenOptions& options = {});

}  // namespace sperf
