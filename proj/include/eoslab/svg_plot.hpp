#pragma once

#include <string>
#include <vector>

#include "eoslab/trace_io.hpp"

namespace eos {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;  // NaN gaps break the polyline
};

struct PlotPanel {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<PlotSeries> series;
};

/// Renders a row of line-chart panels into a standalone SVG file.
void write_svg_panels(const std::vector<PlotPanel>& panels,
                      const std::string& path);

/// Builds the default panel set for a trace CSV (loss, sharpness,
/// alignment, stableness, whichever columns are present) and writes the
/// SVG. Throws when the x column or all requested y columns are missing.
void plot_csv(const CsvTable& table, const std::string& x_column,
              const std::vector<std::string>& y_columns,
              const std::string& out_path);

}  // namespace eos
