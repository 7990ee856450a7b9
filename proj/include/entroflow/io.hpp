#pragma once

// File emission helpers: atomic writes (temp file + rename) and a small
// native SVG line-chart writer, so runs produce plots with no external
// plotting dependency.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "entroflow/errors.hpp"
#include "entroflow/gradflow.hpp"

namespace entroflow {

inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string());
}

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

// Line chart with ticked axes; y may be drawn on a log10 scale (non-positive
// values are dropped from log plots).
inline std::string svg_line_chart(const std::vector<SvgSeries>& series,
                                  const std::string& x_label,
                                  const std::string& y_label, bool log_y) {
  const double width = 840, height = 520;
  const double ml = 80, mr = 30, mt = 30, mb = 60;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (log_y && y <= 0.0) continue;
      const double yy = log_y ? std::log10(y) : y;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, yy);
      ymax = std::max(ymax, yy);
    }
  if (xmin > xmax) {
    xmin = 0.0;
    xmax = 1.0;
  }
  if (ymin > ymax) {
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax - xmin < 1e-300) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) {
    ymax += 0.5;
    ymin -= 0.5;
  }

  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  std::string svg;
  char buf[256];
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" "
                "height=\"%g\" viewBox=\"0 0 %g %g\">\n",
                width, height, width, height);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // axes
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                ml, height - mb, width - mr, height - mb);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                ml, mt, ml, height - mb);
  svg += buf;

  const int ticks = 6;
  for (int i = 0; i <= ticks; ++i) {
    const double xv = xmin + (xmax - xmin) * i / ticks;
    const double xp = px(xv);
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                  xp, height - mb, xp, height - mb + 5);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" font-size=\"12\" text-anchor=\"middle\">"
                  "%.4g</text>\n",
                  xp, height - mb + 20, xv);
    svg += buf;

    const double yv = ymin + (ymax - ymin) * i / ticks;
    const double yp = py(yv);
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                  ml - 5, yp, ml, yp);
    svg += buf;
    if (log_y)
      std::snprintf(buf, sizeof(buf),
                    "<text x=\"%g\" y=\"%g\" font-size=\"12\" text-anchor=\"end\">"
                    "1e%.3g</text>\n",
                    ml - 8, yp + 4, yv);
    else
      std::snprintf(buf, sizeof(buf),
                    "<text x=\"%g\" y=\"%g\" font-size=\"12\" text-anchor=\"end\">"
                    "%.4g</text>\n",
                    ml - 8, yp + 4, yv);
    svg += buf;
  }

  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-size=\"14\" text-anchor=\"middle\">"
                "%s</text>\n",
                (ml + width - mr) / 2, height - 15, x_label.c_str());
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"20\" y=\"%g\" font-size=\"14\" text-anchor=\"middle\" "
                "transform=\"rotate(-90 20 %g)\">%s</text>\n",
                (mt + height - mb) / 2, (mt + height - mb) / 2, y_label.c_str());
  svg += buf;

  int color = 0;
  for (const auto& s : series) {
    std::string pts;
    for (const auto& [x, y] : s.points) {
      if (log_y && y <= 0.0) continue;
      const double yy = log_y ? std::log10(y) : y;
      std::snprintf(buf, sizeof(buf), "%g,%g ", px(x), py(yy));
      pts += buf;
    }
    if (pts.empty()) continue;
    std::snprintf(buf, sizeof(buf),
                  "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\" "
                  "points=\"%s\"/>\n",
                  palette[color % 8], pts.c_str());
    svg += buf;
    if (series.size() > 1 && !s.label.empty()) {
      const double ly = mt + 16.0 * (color + 1);
      std::snprintf(buf, sizeof(buf),
                    "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" "
                    "stroke-width=\"2\"/>\n",
                    ml + 12, ly - 4, ml + 34, ly - 4, palette[color % 8]);
      svg += buf;
      std::snprintf(buf, sizeof(buf),
                    "<text x=\"%g\" y=\"%g\" font-size=\"12\">%s</text>\n", ml + 40,
                    ly, s.label.c_str());
      svg += buf;
    }
    ++color;
  }
  svg += "</svg>\n";
  return svg;
}

inline std::string convergence_svg(const FlowTrajectory& traj) {
  SvgSeries s;
  s.label = "gap";
  for (const auto& rec : traj.records) s.points.emplace_back(rec.t, rec.gap);
  return svg_line_chart({s}, "t", "suboptimality gap", /*log_y=*/true);
}

}  // namespace entroflow
