#pragma once

// Minimal SVG line charts for trajectory artifacts.

#include <string>
#include <vector>

namespace mdac {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool equal_axes = false;
};

/// Panels stacked vertically in one document. Output depends only on the
/// data, so identical inputs give identical bytes.
std::string render_svg(const std::vector<Panel>& panels, int width = 640,
                       int panel_height = 320);

}  // namespace mdac
