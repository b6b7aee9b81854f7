#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stencilperf/csv.hpp"
#include "stencilperf/layer_condition.hpp"
#include "stencilperf/machine.hpp"
#include "stencilperf/perf_model.hpp"
#include "stencilperf/stencil.hpp"

namespace sperf {

/// Header of the main result table, in order.
const std::vector<std::string>& grid_csv_header();

struct EcmColumns {
  double tol = 0;   // T_comp
  double tnol = 0;  // T_RegL1
  double tl1l2 = 0;
  double tl2l3 = 0;
  double tl3mem = 0;
  double roofline = 0;
  friend bool operator==(const EcmColumns&, const EcmColumns&) = default;
};

EcmColumns ecm_columns(const EcmPrediction& ecm, const RooflinePrediction& roofline);

/// One row of the main table: a cubic grid edge with every predictor's terms.
struct GridRow {
  long N = 0;
  std::optional<double> benchmark_cycles;
  std::optional<EcmColumns> lc;
  std::optional<EcmColumns> cs;
  friend bool operator==(const GridRow&, const GridRow&) = default;
};

CsvTable grid_table(const std::vector<GridRow>& rows);
/// Throws CsvError unless the header is exactly grid_csv_header().
std::vector<GridRow> grid_rows(const CsvTable& table);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);
std::string format_optional(const std::optional<double>& v);
std::optional<double> parse_optional(const std::string& cell);

/// Writes the table; rejects a table whose header differs from `expected`.
void write_csv(const std::filesystem::path& path, const CsvTable& table,
               const std::vector<std::string>& expected);
CsvTable read_csv(const std::filesystem::path& path);

enum class Status { green, yellow, red };
std::string_view to_string(Status s);
Status parse_status(std::string_view s);

struct StatusAssessment {
  Status status = Status::yellow;
  std::string comment;
  std::optional<double> max_deviation;  // relative, over the compared rows
};

/// Compares benchmark cycles with the LC-based ECM total for every row with
/// N >= plateau_start: green within 20%, yellow within 50%, red otherwise.
/// Yellow without benchmark data.
StatusAssessment assess_status(const std::vector<GridRow>& rows, long plateau_start,
                               OverlapPolicy policy);

/// ECM total of a row's terms under the given policy.
double ecm_total(const EcmColumns& e, OverlapPolicy policy);

/// The auxiliary tables the plots need besides the main one.
struct ReportTables {
  CsvTable grid;
  std::optional<CsvTable> transfers;
  std::optional<CsvTable> threads;
  std::optional<CsvTable> blocking;
  std::optional<CsvTable> phenomenological;
};

std::vector<std::string> transfers_csv_header(const MachineModel& machine);
const std::vector<std::string>& threads_csv_header();
const std::vector<std::string>& blocking_csv_header();
const std::vector<std::string>& phenomenological_csv_header();

struct PlotSet {
  std::map<std::string, std::string> svgs;  // file name -> SVG text
  std::vector<std::string> notices;          // plots skipped and why
};

/// Secondary-axis label for a primary tick: MLUP/s to three significant digits.
std::string mlups_label(double cycles_per_cl, const MachineModel& machine,
                        std::size_t element_bytes);

/// All plots are pure functions of the tables and the machine.
PlotSet render_plots(const ReportTables& tables, const MachineModel& machine,
                     std::size_t element_bytes);

struct HtmlInputs {
  StencilSpec spec;
  MachineModel machine;
  std::string machine_file_text;
  std::string kernel_source;
  std::vector<LayerCondition> layer_conditions;
  std::vector<std::string> commands;  // reproduction steps, shown verbatim
  PlotSet plots;
  StatusAssessment status;
  std::vector<std::string> notes;
};

std::string sha256_hex(std::string_view data);
std::string html_escape(std::string_view text);
std::string render_html(const HtmlInputs& in);

}  // namespace sperf
