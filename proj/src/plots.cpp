// SPDX-License-Identifier: Apache-2.0
#include "vidistill/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "vidistill/metrics.hpp"

namespace vidistill {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

constexpr const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

}  // namespace

void write_svg_line_plot(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<PlotSeries>& series) {
  if (series.empty()) throw std::invalid_argument("write_svg_line_plot: no series");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin > xmax) throw std::invalid_argument("write_svg_line_plot: no points");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  const double W = 640, H = 420, L = 70, R = 20, Tm = 40, Bm = 50;
  const double pw = W - L - R, ph = H - Tm - Bm;
  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return Tm + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_svg_line_plot: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";
  // axes
  out << "<line x1=\"" << L << "\" y1=\"" << Tm + ph << "\" x2=\"" << L + pw << "\" y2=\""
      << Tm + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L << "\" y2=\"" << Tm + ph
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double fx = xmin + (xmax - xmin) * i / 4.0;
    double fy = ymin + (ymax - ymin) * i / 4.0;
    out << "<line x1=\"" << sx(fx) << "\" y1=\"" << Tm + ph << "\" x2=\"" << sx(fx) << "\" y2=\""
        << Tm + ph + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << sx(fx) << "\" y=\"" << Tm + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(fx) << "</text>\n";
    out << "<line x1=\"" << L - 5 << "\" y1=\"" << sy(fy) << "\" x2=\"" << L << "\" y2=\""
        << sy(fy) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << L - 8 << "\" y=\"" << sy(fy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(fy) << "</text>\n";
  }
  out << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
  out << "<text x=\"16\" y=\"" << Tm + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " << Tm + ph / 2
      << ")\">" << ylabel << "</text>\n";

  size_t color_i = 0;
  for (const auto& s : series) {
    const char* color = kSeriesColors[color_i % 5];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : s.points) out << fmt(sx(x)) << "," << fmt(sy(y)) << " ";
    out << "\"/>\n";
    if (series.size() > 1) {
      double ly = Tm + 14 + 16 * static_cast<double>(color_i);
      out << "<line x1=\"" << L + pw - 110 << "\" y1=\"" << ly << "\" x2=\"" << L + pw - 90
          << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << L + pw - 84 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
          << s.name << "</text>\n";
    }
    ++color_i;
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write_svg_line_plot: write failed for " + path);
}

std::vector<std::string> emit_plots(const std::string& log_path, const std::string& out_dir) {
  auto records = MetricsLog::read(log_path);
  PlotSeries loss{"loss", {}}, lr{"lr", {}};
  std::map<std::string, PlotSeries> acc;
  for (const auto& rec : records) {
    std::string type = rec.value("type", "");
    if (type == "train") {
      double step = rec.at("step").get<double>();
      loss.points.emplace_back(step, rec.at("loss_total").get<double>());
      lr.points.emplace_back(step, rec.at("lr").get<double>());
    } else if (type == "eval") {
      std::string protocol = rec.value("protocol", "eval");
      auto& s = acc[protocol];
      s.name = protocol;
      s.points.emplace_back(rec.value("epoch", 0.0), rec.at("top1").get<double>());
    }
  }
  if (loss.points.empty() && acc.empty())
    throw std::invalid_argument("emit_plots: log has no plottable records");

  fs::create_directories(out_dir);
  std::vector<std::string> written;
  if (!loss.points.empty()) {
    std::string p1 = out_dir + "/loss_vs_step.svg";
    write_svg_line_plot(p1, "Training loss", "step", "loss", {loss});
    written.push_back(p1);
    std::string p2 = out_dir + "/lr_vs_step.svg";
    write_svg_line_plot(p2, "Learning rate schedule", "step", "learning rate", {lr});
    written.push_back(p2);
  }
  if (!acc.empty()) {
    std::vector<PlotSeries> series;
    for (auto& [name, s] : acc) {
      std::sort(s.points.begin(), s.points.end());
      series.push_back(s);
    }
    std::string p3 = out_dir + "/eval_accuracy_vs_epoch.svg";
    write_svg_line_plot(p3, "Evaluation accuracy", "epoch", "top-1 accuracy", series);
    written.push_back(p3);
  }
  return written;
}

}  // namespace vidistill
