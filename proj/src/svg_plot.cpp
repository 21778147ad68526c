#include "eoslab/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace eos {

namespace {

constexpr int kPanelW = 360;
constexpr int kPanelH = 280;
constexpr int kMarginL = 62;
constexpr int kMarginR = 16;
constexpr int kMarginT = 34;
constexpr int kMarginB = 46;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b"};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void grow(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool valid() const { return lo <= hi; }
  void pad() {
    if (!valid()) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi == lo) {
      hi += 0.5;
      lo -= 0.5;
    } else {
      const double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

std::string fmt_tick(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

void render_panel(std::ostringstream& svg, const PlotPanel& panel, int x0) {
  const int px = x0 + kMarginL;
  const int py = kMarginT;
  const int pw = kPanelW - kMarginL - kMarginR;
  const int ph = kPanelH - kMarginT - kMarginB;

  Range rx, ry;
  for (const PlotSeries& s : panel.series) {
    for (double v : s.x) rx.grow(v);
    for (double v : s.y) {
      ry.grow(panel.log_y ? (v > 0 ? std::log10(v) : std::nan("")) : v);
    }
  }
  rx.pad();
  ry.pad();

  auto map_x = [&](double v) {
    return px + pw * (v - rx.lo) / (rx.hi - rx.lo);
  };
  auto map_y = [&](double v) {
    const double t = panel.log_y ? (v > 0 ? std::log10(v) : ry.lo) : v;
    return py + ph * (1.0 - (t - ry.lo) / (ry.hi - ry.lo));
  };

  svg << "<rect x='" << px << "' y='" << py << "' width='" << pw
      << "' height='" << ph << "' fill='white' stroke='#333'/>\n";
  svg << "<text x='" << x0 + kPanelW / 2 << "' y='" << kMarginT - 12
      << "' text-anchor='middle' font-size='13'>" << panel.title << "</text>\n";

  for (int i = 0; i <= 4; ++i) {
    const double fx = rx.lo + (rx.hi - rx.lo) * i / 4.0;
    const double fy = ry.lo + (ry.hi - ry.lo) * i / 4.0;
    const double gx = map_x(fx);
    const double gy = py + ph * (1.0 - i / 4.0);
    svg << "<line x1='" << gx << "' y1='" << py << "' x2='" << gx << "' y2='"
        << py + ph << "' stroke='#ddd'/>\n";
    svg << "<line x1='" << px << "' y1='" << gy << "' x2='" << px + pw
        << "' y2='" << gy << "' stroke='#ddd'/>\n";
    svg << "<text x='" << gx << "' y='" << py + ph + 16
        << "' text-anchor='middle' font-size='10'>" << fmt_tick(fx)
        << "</text>\n";
    svg << "<text x='" << px - 6 << "' y='" << gy + 3
        << "' text-anchor='end' font-size='10'>" << fmt_tick(fy)
        << "</text>\n";
  }
  svg << "<text x='" << px + pw / 2 << "' y='" << py + ph + 34
      << "' text-anchor='middle' font-size='11'>" << panel.x_label
      << "</text>\n";
  svg << "<text x='" << x0 + 14 << "' y='" << py + ph / 2
      << "' text-anchor='middle' font-size='11' transform='rotate(-90 "
      << x0 + 14 << " " << py + ph / 2 << ")'>"
      << (panel.log_y ? "log10 " + panel.y_label : panel.y_label)
      << "</text>\n";

  int ci = 0;
  for (const PlotSeries& s : panel.series) {
    const char* color = kColors[ci % 6];
    svg << "<polyline fill='none' stroke='" << color
        << "' stroke-width='1.2' points='";
    bool open = false;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const bool good = std::isfinite(s.x[i]) && std::isfinite(s.y[i]) &&
                        (!panel.log_y || s.y[i] > 0);
      if (!good) {
        if (open) {
          svg << "' /><polyline fill='none' stroke='" << color
              << "' stroke-width='1.2' points='";
          open = false;
        }
        continue;
      }
      svg << map_x(s.x[i]) << ',' << map_y(s.y[i]) << ' ';
      open = true;
    }
    svg << "'/>\n";
    if (panel.series.size() > 1) {
      svg << "<text x='" << px + 8 << "' y='" << py + 14 + 13 * ci
          << "' font-size='10' fill='" << color << "'>" << s.label
          << "</text>\n";
    }
    ++ci;
  }
}

}  // namespace

void write_svg_panels(const std::vector<PlotPanel>& panels,
                      const std::string& path) {
  if (panels.empty()) throw std::invalid_argument("no panels to plot");
  std::ostringstream svg;
  const int width = kPanelW * static_cast<int>(panels.size());
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << kPanelH << "' font-family='sans-serif'>\n";
  svg << "<rect width='" << width << "' height='" << kPanelH
      << "' fill='white'/>\n";
  int x0 = 0;
  for (const PlotPanel& panel : panels) {
    render_panel(svg, panel, x0);
    x0 += kPanelW;
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << svg.str();
}

void plot_csv(const CsvTable& table, const std::string& x_column,
              const std::vector<std::string>& y_columns,
              const std::string& out_path) {
  const Index xc = table.column(x_column);
  if (xc < 0) {
    throw std::runtime_error("plot: missing x column '" + x_column + "'");
  }
  std::vector<PlotPanel> panels;
  for (const std::string& name : y_columns) {
    const Index yc = table.column(name);
    if (yc < 0) {
      throw std::runtime_error("plot: missing column '" + name + "'");
    }
    PlotPanel panel;
    panel.title = name;
    panel.x_label = x_column;
    panel.y_label = name;
    panel.log_y = name == "loss" || name == "sqrt_loss" || name == "grad_norm";
    PlotSeries s;
    s.label = name;
    s.x = table.columns[static_cast<std::size_t>(xc)];
    s.y = table.columns[static_cast<std::size_t>(yc)];
    panel.series.push_back(std::move(s));
    panels.push_back(std::move(panel));
  }
  if (panels.empty()) throw std::runtime_error("plot: no columns requested");
  write_svg_panels(panels, out_path);
}

}  // namespace eos
