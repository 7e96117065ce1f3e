#include "compdiff/svg.hpp"

#include <cstdio>

#include "compdiff/errors.hpp"

namespace compdiff {

namespace {

constexpr double kPlot = 300.0;   // plot box side, px
constexpr double kMargin = 12.0;  // outer margin and inter-panel gap
constexpr double kHeader = 24.0;  // label strip above each plot box

const char* kPalette[4] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
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

}  // namespace

std::string render_scatter_svg(const std::vector<ScatterPanel>& panels,
                               Vec2 lo, Vec2 hi) {
  if (panels.empty() || panels.size() > 4)
    throw ConfigError("plot: between 1 and 4 panels supported, got " +
                      std::to_string(panels.size()));
  if (!(hi.x > lo.x) || !(hi.y > lo.y))
    throw ConfigError("plot: axis bounds must satisfy lo < hi");

  const int n = static_cast<int>(panels.size());
  const double width = kMargin + n * (kPlot + kMargin);
  const double height = kHeader + kPlot + 2 * kMargin;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(width) +
         "\" height=\"" + px(height) + "\" viewBox=\"0 0 " + px(width) + " " +
         px(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int i = 0; i < n; ++i) {
    const double x0 = kMargin + i * (kPlot + kMargin);
    const double y0 = kMargin + kHeader;
    const std::string id = "clip" + std::to_string(i);

    svg += "<clipPath id=\"" + id + "\"><rect x=\"" + px(x0) + "\" y=\"" +
           px(y0) + "\" width=\"" + px(kPlot) + "\" height=\"" + px(kPlot) +
           "\"/></clipPath>\n";
    svg += "<text x=\"" + px(x0 + kPlot / 2) + "\" y=\"" + px(kMargin + 14) +
           "\" font-family=\"sans-serif\" font-size=\"13\" "
           "text-anchor=\"middle\">" +
           escape_xml(panels[i].label) + "</text>\n";
    svg += "<g clip-path=\"url(#" + id + ")\" fill=\"" +
           std::string(kPalette[i]) + "\" fill-opacity=\"0.45\">\n";
    const double sx = kPlot / (hi.x - lo.x);
    const double sy = kPlot / (hi.y - lo.y);
    for (const Vec2& p : panels[i].points) {
      const double cx = x0 + (p.x - lo.x) * sx;
      const double cy = y0 + (hi.y - p.y) * sy;  // SVG y grows downward
      svg += "<circle cx=\"" + px(cx) + "\" cy=\"" + px(cy) +
             "\" r=\"1.6\"/>\n";
    }
    svg += "</g>\n";
    svg += "<rect x=\"" + px(x0) + "\" y=\"" + px(y0) + "\" width=\"" +
           px(kPlot) + "\" height=\"" + px(kPlot) +
           "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace compdiff
