#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "stencilperf/report.hpp"

namespace sperf {

namespace {

struct Axis {
  double lo = 0, hi = 1;
  std::vector<double> ticks;
};

Axis nice_axis(double lo, double hi, int target = 5) {
  if (!(hi > lo)) hi = lo + 1;
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double step = (norm <= 1 ? 1 : norm <= 2 ? 2 : norm <= 5 ? 5 : 10) * mag;
  Axis a;
  a.lo = std::floor(lo / step + 1e-9) * step;
  a.hi = std::ceil(hi / step - 1e-9) * step;
  const int n = static_cast<int>(std::lround((a.hi - a.lo) / step));
  for (int i = 0; i <= n; ++i) a.ticks.push_back(a.lo + i * step);
  return a;
}

std::string tick_text(double v) {
  if (std::abs(v) < 1e-12) return "0";
  return fmt::format("{:g}", v);
}

std::string px(double v) { return fmt::format("{:.2f}", v); }

std::string esc(std::string_view s) { return html_escape(s); }

class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {}

  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1,
            std::string_view dash = {}) {
    body_ += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n",
                         px(x1), px(y1), px(x2), px(y2), stroke, width, dash_attr(dash));
  }
  void rect(double x, double y, double w, double h, std::string_view fill,
            std::string_view stroke = "none") {
    body_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"{}\"/>\n",
                         px(x), px(y), px(w), px(h), fill, stroke);
  }
  void circle(double x, double y, double r, std::string_view fill) {
    body_ += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n", px(x), px(y), px(r),
                         fill);
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke,
                double width = 2, std::string_view dash = {}) {
    if (pts.empty()) return;
    std::string p;
    for (const auto& [x, y] : pts) p += fmt::format("{}{},{}", p.empty() ? "" : " ", px(x), px(y));
    body_ += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n",
                         p, stroke, width, dash_attr(dash));
  }
  void text(double x, double y, std::string_view s, std::string_view anchor = "middle",
            int size = 12, bool vertical = false) {
    const std::string rot =
        vertical ? fmt::format(" transform=\"rotate(-90 {} {})\"", px(x), px(y)) : std::string();
    body_ += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"{}\"{}>{}</text>\n",
                         px(x), px(y), size, anchor, rot, esc(s));
  }
  std::string finish() const {
    return fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" "
                       "height=\"{1}\" viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\">\n"
                       "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n{2}</svg>\n",
                       w_, h_, body_);
  }

 private:
  static std::string dash_attr(std::string_view dash) {
    return dash.empty() ? std::string() : fmt::format(" stroke-dasharray=\"{}\"", dash);
  }
  double w_, h_;
  std::string body_;
};

struct LegendEntry {
  std::string label;
  std::string color;
  enum Kind { box, line, dashed, marker } kind;
};

// A plotting area inside an Svg with linear x and y axes.
class Panel {
 public:
  Panel(Svg& svg, double x0, double y0, double w, double h, Axis xa, Axis ya)
      : svg_(svg), x0_(x0), y0_(y0), w_(w), h_(h), xa_(std::move(xa)), ya_(std::move(ya)) {}

  double X(double v) const { return x0_ + (v - xa_.lo) / (xa_.hi - xa_.lo) * w_; }
  double Y(double v) const { return y0_ + h_ - (v - ya_.lo) / (ya_.hi - ya_.lo) * h_; }
  double width() const { return w_; }

  void frame(std::string_view title, std::string_view xlabel, std::string_view ylabel) {
    for (const double t : ya_.ticks) {
      svg_.line(x0_, Y(t), x0_ + w_, Y(t), "#e0e0e0");
      svg_.text(x0_ - 6, Y(t) + 4, tick_text(t), "end", 11);
    }
    for (const double t : xa_.ticks) {
      svg_.line(X(t), y0_ + h_, X(t), y0_ + h_ + 4, "#333");
      svg_.text(X(t), y0_ + h_ + 17, tick_text(t), "middle", 11);
    }
    svg_.rect(x0_, y0_, w_, h_, "none", "#333");
    svg_.text(x0_ + w_ / 2, y0_ - 10, title, "middle", 14);
    svg_.text(x0_ + w_ / 2, y0_ + h_ + 34, xlabel, "middle", 12);
    svg_.text(x0_ - 45, y0_ + h_ / 2, ylabel, "middle", 12, true);
  }

  template <typename F>
  void secondary_axis(std::string_view label, F&& tick_label) {
    for (const double t : ya_.ticks) {
      if (t <= 0) continue;
      svg_.line(x0_ + w_, Y(t), x0_ + w_ + 4, Y(t), "#333");
      svg_.text(x0_ + w_ + 7, Y(t) + 4, tick_label(t), "start", 11);
    }
    svg_.text(x0_ + w_ + 55, y0_ + h_ / 2, label, "middle", 12, true);
  }

  void legend(const std::vector<LegendEntry>& entries) {
    double y = y0_ + 14;
    for (const auto& e : entries) {
      const double x = x0_ + 10;
      switch (e.kind) {
        case LegendEntry::box: svg_.rect(x, y - 9, 14, 10, e.color); break;
        case LegendEntry::line: svg_.line(x, y - 4, x + 14, y - 4, e.color, 2); break;
        case LegendEntry::dashed: svg_.line(x, y - 4, x + 14, y - 4, e.color, 2, "5,3"); break;
        case LegendEntry::marker: svg_.circle(x + 7, y - 4, 3.5, e.color); break;
      }
      svg_.text(x + 20, y, e.label, "start", 11);
      y += 15;
    }
  }

 private:
  Svg& svg_;
  double x0_, y0_, w_, h_;
  Axis xa_, ya_;
};

const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                         "#9467bd", "#8c564b", "#e377c2", "#17becf"};

using Column = std::vector<std::optional<double>>;

Column column(const CsvTable& t, std::string_view name) {
  Column c;
  const auto idx = t.column(name);
  for (const auto& r : t.rows) c.push_back(parse_optional(r[idx]));
  return c;
}

bool any_value(const Column& c) {
  return std::any_of(c.begin(), c.end(), [](const auto& v) { return v.has_value(); });
}

double min_spacing(const Column& xs);

// Padded by half the smallest spacing so bars at the extremes stay inside.
Axis x_axis_for(const Column& xs) {
  double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
  for (const auto& v : xs) {
    if (!v) continue;
    lo = std::min(lo, *v);
    hi = std::max(hi, *v);
  }
  if (lo > hi) lo = 0, hi = 1;
  return nice_axis(std::min(0.0, lo), hi + 0.5 * min_spacing(xs));
}

double min_spacing(const Column& xs) {
  std::vector<double> v;
  for (const auto& x : xs)
    if (x) v.push_back(*x);
  std::sort(v.begin(), v.end());
  double m = std::numeric_limits<double>::max();
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) m = std::min(m, v[i] - v[i - 1]);
  return m == std::numeric_limits<double>::max() ? 1.0 : m;
}

std::vector<std::pair<double, double>> points(const Panel& p, const Column& xs, const Column& ys) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] && ys[i]) out.emplace_back(p.X(*xs[i]), p.Y(*ys[i]));
  return out;
}

constexpr double kW = 760, kPanelH = 300, kTop = 40, kLeft = 80, kPlotW = 560, kGap = 90;

// One stacked ECM panel: transfer terms as stacked bars, T_comp and Roofline
// as lines, benchmark cycles as markers.
void ecm_panel(Svg& svg, double y0, const std::string& title, const Column& ns, const Column& tol,
               const Column& tnol, const Column& l1l2, const Column& l2l3, const Column& l3mem,
               const Column* roof, const Column* bench, const MachineModel& machine,
               std::size_t element_bytes) {
  double ymax = 0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double stack = tnol[i].value_or(0) + l1l2[i].value_or(0) + l2l3[i].value_or(0) +
                         l3mem[i].value_or(0);
    ymax = std::max({ymax, stack, tol[i].value_or(0)});
    if (roof) ymax = std::max(ymax, (*roof)[i].value_or(0));
    if (bench) ymax = std::max(ymax, (*bench)[i].value_or(0));
  }
  const Axis xa = x_axis_for(ns);
  Panel p(svg, kLeft, y0, kPlotW, kPanelH, xa, nice_axis(0, ymax));
  p.frame(title, "N (grid edge, N^3 points)", "cycles / CL");
  p.secondary_axis("MLUP/s", [&](double t) { return mlups_label(t, machine, element_bytes); });

  const double bar = std::max(2.0, 0.6 * min_spacing(ns) / (xa.hi - xa.lo) * p.width());
  const Column* stack[] = {&tnol, &l1l2, &l2l3, &l3mem};
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!ns[i]) continue;
    double base = 0;
    for (int s = 0; s < 4; ++s) {
      const auto v = (*stack[s])[i];
      if (!v || *v <= 0) continue;
      svg.rect(p.X(*ns[i]) - bar / 2, p.Y(base + *v), bar, p.Y(base) - p.Y(base + *v), kColors[s]);
      base += *v;
    }
  }
  svg.polyline(points(p, ns, tol), "#000000", 2);
  if (roof) svg.polyline(points(p, ns, *roof), kColors[4], 2, "6,3");
  if (bench)
    for (const auto& [x, y] : points(p, ns, *bench)) svg.circle(x, y, 3.5, kColors[3]);

  std::vector<LegendEntry> legend{{"T_RegL1", kColors[0], LegendEntry::box},
                                  {"T_L1L2", kColors[1], LegendEntry::box},
                                  {"T_L2L3", kColors[2], LegendEntry::box},
                                  {"T_L3MEM", kColors[3], LegendEntry::box},
                                  {"T_comp", "#000000", LegendEntry::line}};
  if (roof) legend.push_back({"Roofline", kColors[4], LegendEntry::dashed});
  if (bench && any_value(*bench)) legend.push_back({"Benchmark", kColors[3], LegendEntry::marker});
  p.legend(legend);
}

std::optional<std::string> ecm_plot(const ReportTables& t, const MachineModel& m, std::size_t eb) {
  const auto& g = t.grid;
  const auto ns = column(g, "N^3");
  struct P {
    std::string title;
    Column tol, tnol, l1l2, l2l3, l3mem, roof;
    bool has_roof;
  };
  std::vector<P> panels;
  for (const auto* pred : {"LC", "CS"}) {
    P p{fmt::format("ECM ({})", std::string(pred) == "LC" ? "layer conditions" : "cache simulation"),
        column(g, fmt::format("ECM {} Tol", pred)),
        column(g, fmt::format("ECM {} Tnol", pred)),
        column(g, fmt::format("ECM {} Tl1l2", pred)),
        column(g, fmt::format("ECM {} Tl2l3", pred)),
        column(g, fmt::format("ECM {} Tl3mem", pred)),
        column(g, fmt::format("Roofline {} cycl", pred)),
        true};
    if (any_value(p.tol)) panels.push_back(std::move(p));
  }
  Column ph_ns;
  if (t.phenomenological) {
    const auto& ph = *t.phenomenological;
    P p{"ECM (phenomenological)", column(ph, "PH Tol"), column(ph, "PH Tnol"),
        column(ph, "PH Tl1l2"), column(ph, "PH Tl2l3"), column(ph, "PH Tl3mem"),
        column(ph, "Measured cycl"), false};
    ph_ns = column(ph, "N^3");
    if (!ph.rows.empty()) panels.push_back(std::move(p));
  }
  if (panels.empty()) return std::nullopt;
  const auto bench = column(g, "Benchmark cycl");
  Svg svg(kW, kTop + panels.size() * (kPanelH + kGap));
  double y = kTop;
  for (const auto& p : panels) {
    const bool phen = !p.has_roof;
    ecm_panel(svg, y, p.title, phen ? ph_ns : ns, p.tol, p.tnol, p.l1l2, p.l2l3, p.l3mem,
              phen ? nullptr : &p.roof, phen ? &p.roof : &bench, m, eb);
    y += kPanelH + kGap;
  }
  return svg.finish();
}

struct Line {
  std::string label;
  Column ys;
  std::string color;
  LegendEntry::Kind kind;
};

std::string line_plot(const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const Column& xs, const std::vector<Line>& lines) {
  double ymax = 0;
  for (const auto& l : lines)
    for (const auto& v : l.ys) ymax = std::max(ymax, v.value_or(0));
  const Axis xa = x_axis_for(xs);
  Svg svg(kW, kTop + kPanelH + kGap);
  Panel p(svg, kLeft, kTop, kPlotW, kPanelH, xa, nice_axis(0, ymax));
  p.frame(title, xlabel, ylabel);
  std::vector<LegendEntry> legend;
  for (const auto& l : lines) {
    if (!any_value(l.ys)) continue;
    if (l.kind == LegendEntry::marker) {
      for (const auto& [x, y] : points(p, xs, l.ys)) svg.circle(x, y, 3.5, l.color);
    } else {
      svg.polyline(points(p, xs, l.ys), l.color, 2, l.kind == LegendEntry::dashed ? "6,3" : "");
    }
    legend.push_back({l.label, l.color, l.kind});
  }
  p.legend(legend);
  return svg.finish();
}

Column ecm_total_column(const CsvTable& g, std::string_view pred, OverlapPolicy policy) {
  Column out;
  const auto tol = column(g, fmt::format("ECM {} Tol", pred));
  const auto tnol = column(g, fmt::format("ECM {} Tnol", pred));
  const auto a = column(g, fmt::format("ECM {} Tl1l2", pred));
  const auto b = column(g, fmt::format("ECM {} Tl2l3", pred));
  const auto c = column(g, fmt::format("ECM {} Tl3mem", pred));
  for (std::size_t i = 0; i < tol.size(); ++i) {
    if (!tol[i] || !tnol[i] || !a[i] || !b[i] || !c[i]) {
      out.emplace_back();
      continue;
    }
    out.push_back(ecm_total({*tol[i], *tnol[i], *a[i], *b[i], *c[i], 0}, policy));
  }
  return out;
}

}  // namespace

std::string mlups_label(double cycles_per_cl, const MachineModel& machine,
                        std::size_t element_bytes) {
  const double mlups = cycles_to_lups(cycles_per_cl, machine, element_bytes) / 1e6;
  // Three significant digits, without exponent notation for usual magnitudes.
  const int digits = mlups >= 1 ? static_cast<int>(std::floor(std::log10(mlups))) + 1 : 1;
  const double scale = std::pow(10.0, digits - 3);
  const double rounded = std::round(mlups / scale) * scale;
  return digits >= 3 ? fmt::format("{:.0f}", rounded)
                     : fmt::format("{:.{}f}", rounded, 3 - digits);
}

PlotSet render_plots(const ReportTables& t, const MachineModel& machine,
                     std::size_t element_bytes) {
  PlotSet out;
  if (t.grid.header != grid_csv_header()) throw CsvError("grid table does not have the result schema");
  const auto ns = column(t.grid, "N^3");

  if (auto svg = ecm_plot(t, machine, element_bytes)) out.svgs["ecm.svg"] = *svg;
  else out.notices.push_back("stacked ECM plot skipped: no ECM columns populated");

  {
    std::vector<Line> lines{
        {"ECM (LC)", ecm_total_column(t.grid, "LC", machine.overlap_policy), kColors[0], LegendEntry::line},
        {"Roofline (LC)", column(t.grid, "Roofline LC cycl"), kColors[1], LegendEntry::line},
        {"Roofline (CS)", column(t.grid, "Roofline CS cycl"), kColors[2], LegendEntry::dashed},
        {"Benchmark", column(t.grid, "Benchmark cycl"), kColors[3], LegendEntry::marker}};
    if (any_value(lines[1].ys) || any_value(lines[2].ys))
      out.svgs["roofline.svg"] = line_plot("Roofline vs ECM", "N (grid edge, N^3 points)",
                                           "cycles / CL", ns, lines);
    else
      out.notices.push_back("Roofline plot skipped: no Roofline columns populated");
  }

  if (t.transfers && !t.transfers->rows.empty()) {
    const auto& tt = *t.transfers;
    const auto xs = column(tt, "N^3");
    std::vector<Line> lines;
    int color = 0;
    for (const auto& link : link_names(machine)) {
      for (const char* pred : {"LC", "CS"}) {
        const auto ld = column(tt, fmt::format("{} {} load B/CL", pred, link));
        const auto st = column(tt, fmt::format("{} {} store B/CL", pred, link));
        Column sum;
        for (std::size_t i = 0; i < ld.size(); ++i)
          sum.push_back(ld[i] && st[i] ? std::optional<double>(*ld[i] + *st[i]) : std::nullopt);
        lines.push_back({fmt::format("{} ({})", link, pred), sum, kColors[color],
                         std::string(pred) == "LC" ? LegendEntry::line : LegendEntry::dashed});
      }
      ++color;
    }
    out.svgs["transfers.svg"] =
        line_plot("Data transfers", "N (grid edge, N^3 points)", "bytes / CL", xs, lines);
  } else {
    out.notices.push_back("data transfer plot skipped: no transfer table");
  }

  if (t.threads && !t.threads->rows.empty()) {
    const auto& tt = *t.threads;
    const auto xs = column(tt, "Cores");
    std::vector<Line> lines{
        {"ECM (LC)", column(tt, "ECM LC MLUP/s"), kColors[0], LegendEntry::line},
        {"Benchmark", column(tt, "Benchmark MLUP/s"), kColors[3], LegendEntry::marker}};
    out.svgs["threads.svg"] = line_plot("Thread scaling", "cores", "MLUP/s", xs, lines);
  } else {
    out.notices.push_back("thread scaling plot skipped: no thread table");
  }

  if (t.blocking && !t.blocking->rows.empty()) {
    const auto& tt = *t.blocking;
    const auto xs = column(tt, "N^3");
    std::vector<Line> lines{
        {"ECM (LC)", column(tt, "ECM LC cycl"), kColors[0], LegendEntry::line},
        {"ECM (LC), blocked", column(tt, "ECM LC blocked cycl"), kColors[2], LegendEntry::dashed},
        {"Benchmark", column(tt, "Benchmark cycl"), kColors[3], LegendEntry::marker},
        {"Benchmark, blocked", column(tt, "Benchmark blocked cycl"), kColors[4], LegendEntry::marker}};
    out.svgs["blocking.svg"] =
        line_plot("Spatial blocking", "N (grid edge, N^3 points)", "cycles / CL", xs, lines);
  } else {
    out.notices.push_back("blocking plot skipped: no blocking table");
  }
  return out;
}

}  // namespace sperf
