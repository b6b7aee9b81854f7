#include "stencilperf/report.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace sperf {

const std::vector<std::string>& grid_csv_header() {
  static const std::vector<std::string> h{
      "N^3",         "Benchmark cycl", "ECM LC Tol",    "ECM LC Tnol",      "ECM LC Tl1l2",
      "ECM LC Tl2l3", "ECM LC Tl3mem", "Roofline LC cycl", "ECM CS Tol",   "ECM CS Tnol",
      "ECM CS Tl1l2", "ECM CS Tl2l3",  "ECM CS Tl3mem",    "Roofline CS cycl"};
  return h;
}

std::vector<std::string> transfers_csv_header(const MachineModel& machine) {
  std::vector<std::string> h{"N^3"};
  for (const char* pred : {"LC", "CS"})
    for (const auto& link : link_names(machine))
      for (const char* dir : {"load", "store"})
        h.push_back(fmt::format("{} {} {} B/CL", pred, link, dir));
  return h;
}

const std::vector<std::string>& threads_csv_header() {
  static const std::vector<std::string> h{"Cores", "ECM LC MLUP/s", "Benchmark MLUP/s"};
  return h;
}

const std::vector<std::string>& blocking_csv_header() {
  static const std::vector<std::string> h{"N^3",           "Block",
                                          "ECM LC cycl",   "ECM LC blocked cycl",
                                          "Benchmark cycl", "Benchmark blocked cycl"};
  return h;
}

const std::vector<std::string>& phenomenological_csv_header() {
  static const std::vector<std::string> h{"N^3",        "PH Tol",       "PH Tnol",
                                          "PH Tl1l2",   "PH Tl2l3",     "PH Tl3mem",
                                          "Measured cycl"};
  return h;
}

EcmColumns ecm_columns(const EcmPrediction& e, const RooflinePrediction& r) {
  return {e.T_comp(), e.T_RegL1(), e.T_L1L2(), e.T_L2L3(), e.T_L3MEM(), r.cycles_per_cl};
}

std::string format_number(double v) { return fmt::format("{}", v); }

std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

std::optional<double> parse_optional(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE)
    throw CsvError(fmt::format("'{}' is not a number", cell));
  return v;
}

CsvTable grid_table(const std::vector<GridRow>& rows) {
  CsvTable t;
  t.header = grid_csv_header();
  for (const auto& r : rows) {
    CsvRow out{fmt::format("{}", r.N), format_optional(r.benchmark_cycles)};
    for (const auto& e : {r.lc, r.cs}) {
      if (e) {
        for (const double v : {e->tol, e->tnol, e->tl1l2, e->tl2l3, e->tl3mem, e->roofline})
          out.push_back(format_number(v));
      } else {
        out.insert(out.end(), 6, std::string());
      }
    }
    t.rows.push_back(std::move(out));
  }
  return t;
}

std::vector<GridRow> grid_rows(const CsvTable& t) {
  if (t.header != grid_csv_header()) throw CsvError("table does not have the grid result schema");
  std::vector<GridRow> rows;
  for (const auto& cells : t.rows) {
    GridRow r;
    const auto n = parse_optional(cells[0]);
    if (!n) throw CsvError("grid row without N^3");
    r.N = static_cast<long>(*n);
    r.benchmark_cycles = parse_optional(cells[1]);
    auto block = [&](std::size_t first) -> std::optional<EcmColumns> {
      std::optional<double> v[6];
      bool any = false, all = true;
      for (int i = 0; i < 6; ++i) {
        v[i] = parse_optional(cells[first + i]);
        any = any || v[i];
        all = all && v[i];
      }
      if (!any) return std::nullopt;
      if (!all) throw CsvError(fmt::format("partially filled ECM block in row N={}", r.N));
      return EcmColumns{*v[0], *v[1], *v[2], *v[3], *v[4], *v[5]};
    };
    r.lc = block(2);
    r.cs = block(8);
    rows.push_back(r);
  }
  return rows;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table,
               const std::vector<std::string>& expected) {
  if (table.header != expected)
    throw CsvError(fmt::format("refusing to write '{}': header does not match its schema",
                               path.string()));
  std::ofstream out(path, std::ios::binary);
  out << format_csv(table);
  if (!out) throw CsvError(fmt::format("cannot write '{}'", path.string()));
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::green: return "green";
    case Status::yellow: return "yellow";
    case Status::red: return "red";
  }
  return "?";
}

Status parse_status(std::string_view s) {
  if (s == "green") return Status::green;
  if (s == "yellow") return Status::yellow;
  if (s == "red") return Status::red;
  throw std::invalid_argument(fmt::format("unknown status '{}' (green, yellow, red)", s));
}

double ecm_total(const EcmColumns& e, OverlapPolicy policy) {
  return compose_ecm({e.tol, e.tnol, e.tl1l2, e.tl2l3, e.tl3mem}, policy).T_total;
}

StatusAssessment assess_status(const std::vector<GridRow>& rows, long plateau_start,
                               OverlapPolicy policy) {
  StatusAssessment a;
  std::size_t compared = 0;
  double worst = 0;
  for (const auto& r : rows) {
    if (r.N < plateau_start || !r.benchmark_cycles || !r.lc) continue;
    const double model = ecm_total(*r.lc, policy);
    if (!(model > 0)) continue;
    worst = std::max(worst, std::abs(*r.benchmark_cycles - model) / model);
    ++compared;
  }
  if (compared == 0) {
    a.status = Status::yellow;
    a.comment = "no benchmark data on the memory-bound plateau; model-only result";
    return a;
  }
  a.max_deviation = worst;
  a.status = worst <= 0.2 ? Status::green : worst <= 0.5 ? Status::yellow : Status::red;
  a.comment = fmt::format("largest benchmark deviation from the ECM prediction over {} sizes "
                          "with N >= {}: {:.1f}%",
                          compared, plateau_start, 100.0 * worst);
  return a;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace {

std::string badge_color(Status s) {
  switch (s) {
    case Status::green: return "#2e7d32";
    case Status::yellow: return "#f9a825";
    case Status::red: return "#c62828";
  }
  return "#777";
}

std::string bytes_text(double b) {
  if (b >= 1024.0 * 1024.0) return fmt::format("{:.2f} MiB", b / (1024.0 * 1024.0));
  if (b >= 1024.0) return fmt::format("{:.1f} KiB", b / 1024.0);
  return fmt::format("{:.0f} B", b);
}

}  // namespace

std::string render_html(const HtmlInputs& in) {
  const auto& s = in.spec;
  const auto& m = in.machine;
  std::string h;
  auto add = [&](std::string_view text) { h.append(text); };
  add("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
  add(fmt::format("<title>{} on {}</title>\n", html_escape(s.name()), html_escape(m.name)));
  add("<style>\n"
      "body{font-family:sans-serif;max-width:1000px;margin:2em auto;color:#222}\n"
      "table{border-collapse:collapse;margin:1em 0}\n"
      "td,th{border:1px solid #bbb;padding:3px 8px;text-align:left}\n"
      "pre{background:#f4f4f4;padding:1em;overflow-x:auto}\n"
      ".badge{display:inline-block;color:#fff;padding:4px 12px;border-radius:4px}\n"
      "figure{margin:1.5em 0}\n"
      "</style>\n</head>\n<body>\n");
  add(fmt::format("<h1>{}</h1>\n", html_escape(s.name())));
  add(fmt::format("<p>Machine: {}</p>\n", html_escape(m.name)));
  add(fmt::format("<p>Status: <span class=\"badge status-{0}\" style=\"background:{1}\">{0}</span> "
                  "{2}</p>\n",
                  to_string(in.status.status), badge_color(in.status.status),
                  html_escape(in.status.comment)));

  add("<h2>Stencil</h2>\n<table>\n");
  const std::pair<const char*, std::string> params[] = {
      {"dimensions", fmt::format("{}", s.dimensions)},
      {"radius", fmt::format("{}", s.radius)},
      {"kind", std::string(to_string(s.kind))},
      {"weighting", std::string(to_string(s.weighting))},
      {"coefficients", std::string(to_string(s.coefficients))},
      {"element type", std::string(to_string(s.element_type))},
      {"points", fmt::format("{}", s.point_count())},
  };
  for (const auto& [k, v] : params)
    add(fmt::format("<tr><th>{}</th><td>{}</td></tr>\n", k, html_escape(v)));
  add("</table>\n<pre class=\"kernel\">");
  add(html_escape(in.kernel_source));
  add("</pre>\n");

  add("<h2>Layer conditions</h2>\n<table>\n<tr><th>Level</th><th>Class</th>"
      "<th>Requirement</th><th>Effective size</th><th>Holds</th><th>Breaks at N</th></tr>\n");
  for (const auto& c : in.layer_conditions)
    add(fmt::format("<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>\n",
                    html_escape(c.level), to_string(c.dimensionality),
                    bytes_text(c.requirement_bytes), bytes_text(c.effective_bytes),
                    c.holds ? "yes" : "no",
                    c.break_size ? fmt::format("{}", *c.break_size) : std::string("never")));
  add("</table>\n");

  add("<h2>Plots</h2>\n");
  for (const auto& [name, svg] : in.plots.svgs) {
    add(fmt::format("<figure id=\"{}\">\n", html_escape(name)));
    add(svg);
    add(fmt::format("<figcaption>{}</figcaption>\n</figure>\n", html_escape(name)));
  }
  for (const auto& n : in.plots.notices) add(fmt::format("<p><em>{}</em></p>\n", html_escape(n)));

  add("<h2>Machine</h2>\n<table>\n");
  add(fmt::format("<tr><th>clock</th><td>{:.3f} GHz</td></tr>\n", m.clock_hz / 1e9));
  add(fmt::format("<tr><th>cores</th><td>{} per socket, {} per NUMA domain</td></tr>\n",
                  m.cores_per_socket, m.cores_per_numa_domain));
  add(fmt::format("<tr><th>memory bandwidth</th><td>{:.1f} GB/s per domain, {:.1f} GB/s per "
                  "socket</td></tr>\n",
                  m.mem_bandwidth.per_numa_domain / 1e9, m.mem_bandwidth.per_socket / 1e9));
  for (const auto& l : m.cache_levels)
    add(fmt::format("<tr><th>{}</th><td>{}, {}-way, {} B lines, {} B/cy {} duplex{}</td></tr>\n",
                    html_escape(l.name), bytes_text(static_cast<double>(l.size_bytes)), l.ways,
                    l.line_size, format_number(l.upstream_bandwidth), to_string(l.duplex),
                    l.victim ? ", victim" : ""));
  add(fmt::format("<tr><th>ports</th><td>{}-bit vectors, {} fp, {} load, {} store{}</td></tr>\n",
                  m.ports.vector_bits, m.ports.fp_ports, m.ports.load_ports, m.ports.store_ports,
                  m.ports.fma ? ", FMA" : ""));
  add(fmt::format("<tr><th>overlap</th><td>{}</td></tr>\n", to_string(m.overlap_policy)));
  add(fmt::format("<tr><th>machine file SHA-256</th><td><code>{}</code></td></tr>\n",
                  sha256_hex(in.machine_file_text)));
  add("</table>\n");

  add("<h2>Reproduction</h2>\n<pre class=\"commands\">");
  for (const auto& c : in.commands) {
    add(html_escape(c));
    add("\n");
  }
  add("</pre>\n");
  if (!in.notes.empty()) {
    add("<h2>Notes</h2>\n<ul>\n");
    for (const auto& n : in.notes) add(fmt::format("<li>{}</li>\n", html_escape(n)));
    add("</ul>\n");
  }
  add("</body>\n</html>\n");
  return h;
}

}  // namespace sperf
