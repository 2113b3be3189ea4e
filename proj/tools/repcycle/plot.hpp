#pragma once

#include <array>
#include <string>
#include <vector>

#include "repcycle/raster.hpp"

namespace repcycle::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  // Categorical x axis: tick i is labeled x_ticks[i] and placed at x = i.
  std::vector<std::string> x_ticks;
  int height = 480;
  int width = 720;
};

// Line chart with axes, tick labels and a legend. Non-finite points (and
// non-positive ones on a log axis) are skipped.
RgbImage line_chart(const std::vector<Series>& series, const ChartSpec& spec);

// Text in a 3 x 5 pixel font scaled by `scale`; lowercase and uppercase
// render the same.
void draw_text(RgbImage& image, int x, int y, const std::string& text, int scale, const std::array<double, 3>& color);
int text_width(const std::string& text, int scale);

}  // namespace repcycle::plot
