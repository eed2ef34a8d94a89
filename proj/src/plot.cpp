#include "mdac/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace mdac {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!std::isfinite(lo)) lo = hi = 0.0;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

void draw_panel(std::ostringstream& os, const Panel& p, double top, int width, int height) {
  const double left = 70, right = width - 20.0, bottom = top + height - 45.0, ptop = top + 30;
  Range xr, yr;
  for (const Series& s : p.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.pad();
  yr.pad();
  if (p.equal_axes) {
    const double sx = (xr.hi - xr.lo) / (right - left);
    const double sy = (yr.hi - yr.lo) / (bottom - ptop);
    const double s = std::max(sx, sy);
    const double cx = 0.5 * (xr.lo + xr.hi), cy = 0.5 * (yr.lo + yr.hi);
    xr.lo = cx - 0.5 * s * (right - left);
    xr.hi = cx + 0.5 * s * (right - left);
    yr.lo = cy - 0.5 * s * (bottom - ptop);
    yr.hi = cy + 0.5 * s * (bottom - ptop);
  }
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * (right - left); };
  auto py = [&](double y) { return bottom - (y - yr.lo) / (yr.hi - yr.lo) * (bottom - ptop); };

  os << "<text x=\"" << num(0.5 * (left + right)) << "\" y=\"" << num(top + 18)
     << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(p.title) << "</text>\n";
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(ptop) << "\" width=\""
     << num(right - left) << "\" height=\"" << num(bottom - ptop)
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(bottom + 15)
       << "\" text-anchor=\"middle\" font-size=\"10\">" << tick(xv) << "</text>\n";
    os << "<text x=\"" << num(left - 5) << "\" y=\"" << num(py(yv) + 3)
       << "\" text-anchor=\"end\" font-size=\"10\">" << tick(yv) << "</text>\n";
  }
  os << "<text x=\"" << num(0.5 * (left + right)) << "\" y=\"" << num(bottom + 32)
     << "\" text-anchor=\"middle\" font-size=\"11\">" << escape(p.x_label) << "</text>\n";
  os << "<text x=\"14\" y=\"" << num(0.5 * (ptop + bottom))
     << "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 14 "
     << num(0.5 * (ptop + bottom)) << ")\">" << escape(p.y_label) << "</text>\n";

  double legend_y = ptop + 14;
  for (const Series& s : p.series) {
    os << "<polyline class=\"series\" data-label=\"" << escape(s.label)
       << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
    if (s.dashed) os << " stroke-dasharray=\"6 4\"";
    os << " points=\"";
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << num(px(s.x[i])) << ',' << num(py(s.y[i])) << (i + 1 < n ? " " : "");
    }
    os << "\"/>\n";
    os << "<text x=\"" << num(right - 8) << "\" y=\"" << num(legend_y)
       << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << s.color << "\">"
       << escape(s.label) << "</text>\n";
    legend_y += 14;
  }
}

}  // namespace

std::string render_svg(const std::vector<Panel>& panels, int width, int panel_height) {
  std::ostringstream os;
  const int height = panel_height * static_cast<int>(std::max<std::size_t>(1, panels.size()));
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i)
    draw_panel(os, panels[i], static_cast<double>(i) * panel_height, width, panel_height);
  os << "</svg>\n";
  return os.str();
}

}  // namespace mdac
