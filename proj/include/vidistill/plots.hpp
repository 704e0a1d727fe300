// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace vidistill {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Minimal deterministic SVG line plot with labeled, ticked axes.
void write_svg_line_plot(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<PlotSeries>& series);

/// Render the metrics log: loss-vs-step and lr-vs-step from training records,
/// accuracy-vs-epoch from evaluation snapshots. Returns the written files;
/// an empty log is an error and writes nothing.
std::vector<std::string> emit_plots(const std::string& log_path, const std::string& out_dir);

}  // namespace vidistill
