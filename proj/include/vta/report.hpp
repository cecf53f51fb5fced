#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "vta/io.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Static report artifacts: delimited-text tables and SVG bar charts.

// Minimal bar chart; one bar per (label, value). Values may be negative.
inline std::string bar_chart_svg(const std::string& title,
                                 const std::vector<std::pair<std::string, double>>& bars) {
  const int width = 640, height = 360;
  const int margin_l = 60, margin_r = 20, margin_t = 50, margin_b = 60;
  const int plot_w = width - margin_l - margin_r;
  const int plot_h = height - margin_t - margin_b;
  double vmax = 0.0, vmin = 0.0;
  for (const auto& [label, v] : bars) {
    vmax = std::max(vmax, v);
    vmin = std::min(vmin, v);
  }
  if (vmax == vmin) vmax = vmin + 1.0;
  const double span = vmax - vmin;
  auto y_of = [&](double v) {
    return margin_t + plot_h - static_cast<int>((v - vmin) / span * plot_h);
  };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
      << height << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='16' "
         "font-family='sans-serif'>"
      << title << "</text>\n";
  const int n = static_cast<int>(bars.size());
  const int slot = n > 0 ? plot_w / n : plot_w;
  const int bar_w = std::max(8, slot * 3 / 5);
  for (int i = 0; i < n; ++i) {
    const auto& [label, v] = bars[static_cast<std::size_t>(i)];
    const int x = margin_l + i * slot + (slot - bar_w) / 2;
    const int y0 = y_of(std::max(0.0, vmin));
    const int y1 = y_of(v);
    const int top = std::min(y0, y1);
    const int h = std::max(1, std::abs(y0 - y1));
    svg << "<rect x='" << x << "' y='" << top << "' width='" << bar_w << "' height='" << h
        << "' fill='#4878a8'/>\n";
    svg << "<text x='" << x + bar_w / 2 << "' y='" << top - 6
        << "' text-anchor='middle' font-size='11' font-family='sans-serif'>";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    svg << buf << "</text>\n";
    svg << "<text x='" << x + bar_w / 2 << "' y='" << height - margin_b + 18
        << "' text-anchor='middle' font-size='12' font-family='sans-serif'>" << label
        << "</text>\n";
  }
  svg << "<line x1='" << margin_l << "' y1='" << margin_t + plot_h << "' x2='"
      << width - margin_r << "' y2='" << margin_t + plot_h
      << "' stroke='black' stroke-width='1'/>\n";
  svg << "</svg>\n";
  return svg.str();
}

inline void write_bar_chart(const fs::path& path, const std::string& title,
                            const std::vector<std::pair<std::string, double>>& bars) {
  write_file_atomic(path, bar_chart_svg(title, bars));
}

}  // namespace vta
