#pragma once

#include <string>
#include <vector>

namespace evtrap {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

// Non-finite points (and non-positive ones on log axes) are skipped.
std::string svg_line_plot(const std::vector<Series>& series, const PlotOptions& opts);

// values are row-major (rows x cols); row 0 is drawn at the bottom.
std::string svg_heatmap(const std::vector<double>& values, std::size_t rows, std::size_t cols,
                        const std::vector<double>& row_values, const std::vector<double>& col_values,
                        const PlotOptions& opts, double vmin = 0.0, double vmax = 1.0);

}  // namespace evtrap
