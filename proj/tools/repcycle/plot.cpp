#include "plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace repcycle::plot {
namespace {

using Color = std::array<double, 3>;

// Rows top to bottom, three bits each, most significant bit on the left.
const std::map<char, std::array<int, 5>>& glyphs() {
  static const std::map<char, std::array<int, 5>> g = {
      {'0', {7, 5, 5, 5, 7}}, {'1', {2, 6, 2, 2, 7}}, {'2', {7, 1, 7, 4, 7}}, {'3', {7, 1, 7, 1, 7}},
      {'4', {5, 5, 7, 1, 1}}, {'5', {7, 4, 7, 1, 7}}, {'6', {7, 4, 7, 5, 7}}, {'7', {7, 1, 1, 1, 1}},
      {'8', {7, 5, 7, 5, 7}}, {'9', {7, 5, 7, 1, 7}}, {'a', {2, 5, 7, 5, 5}}, {'b', {6, 5, 6, 5, 6}},
      {'c', {3, 4, 4, 4, 3}}, {'d', {6, 5, 5, 5, 6}}, {'e', {7, 4, 6, 4, 7}}, {'f', {7, 4, 6, 4, 4}},
      {'g', {3, 4, 5, 5, 3}}, {'h', {5, 5, 7, 5, 5}}, {'i', {7, 2, 2, 2, 7}}, {'j', {1, 1, 1, 5, 2}},
      {'k', {5, 5, 6, 5, 5}}, {'l', {4, 4, 4, 4, 7}}, {'m', {5, 7, 7, 5, 5}}, {'n', {6, 5, 5, 5, 5}},
      {'o', {2, 5, 5, 5, 2}}, {'p', {6, 5, 6, 4, 4}}, {'q', {2, 5, 5, 6, 3}}, {'r', {6, 5, 6, 5, 5}},
      {'s', {3, 4, 2, 1, 6}}, {'t', {7, 2, 2, 2, 2}}, {'u', {5, 5, 5, 5, 7}}, {'v', {5, 5, 5, 5, 2}},
      {'w', {5, 5, 7, 7, 5}}, {'x', {5, 5, 2, 5, 5}}, {'y', {5, 5, 2, 2, 2}}, {'z', {7, 1, 2, 4, 7}},
      {'.', {0, 0, 0, 0, 2}}, {'-', {0, 0, 7, 0, 0}}, {'_', {0, 0, 0, 0, 7}}, {'%', {5, 1, 2, 4, 5}},
      {':', {0, 2, 0, 2, 0}}, {'(', {1, 2, 2, 2, 1}}, {')', {4, 2, 2, 2, 4}}, {'/', {1, 1, 2, 4, 4}},
      {'+', {0, 2, 7, 2, 0}}, {'=', {0, 7, 0, 7, 0}}, {',', {0, 0, 0, 2, 4}}, {' ', {0, 0, 0, 0, 0}}};
  return g;
}

const std::array<Color, 12> kSeriesColors = {{{0.12, 0.47, 0.71},
                                             {1.00, 0.50, 0.05},
                                             {0.17, 0.63, 0.17},
                                             {0.84, 0.15, 0.16},
                                             {0.58, 0.40, 0.74},
                                             {0.55, 0.34, 0.29},
                                             {0.89, 0.47, 0.76},
                                             {0.50, 0.50, 0.50},
                                             {0.74, 0.74, 0.13},
                                             {0.09, 0.75, 0.81},
                                             {0.00, 0.00, 0.50},
                                             {0.20, 0.20, 0.20}}};
const Color kBlack = {0, 0, 0};
const Color kGrid = {0.88, 0.88, 0.88};

void put(RgbImage& img, int x, int y, const Color& c) {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return;
  for (int k = 0; k < 3; ++k) img(y, x, k) = c[k];
}

void fill_rect(RgbImage& img, int x0, int y0, int x1, int y1, const Color& c) {
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) put(img, x, y, c);
}

// Bresenham with a square pen of the given thickness.
void line(RgbImage& img, int x0, int y0, int x1, int y1, const Color& c, int thickness) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  const int lo = -(thickness - 1) / 2, hi = thickness / 2;
  while (true) {
    fill_rect(img, x0 + lo, y0 + lo, x0 + hi, y0 + hi, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

std::string tick_label(double v) {
  char buf[32];
  const double a = std::abs(v);
  if (v == 0.0)
    std::snprintf(buf, sizeof(buf), "0");
  else if (a >= 1e4 || a < 1e-2)
    std::snprintf(buf, sizeof(buf), "%.1e", v);
  else if (a >= 100)
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  else
    std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// Roughly `count` round tick values covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int count) {
  const double raw = (hi - lo) / count;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return out;
}

}  // namespace

int text_width(const std::string& text, int scale) { return static_cast<int>(text.size()) * 4 * scale - scale; }

void draw_text(RgbImage& image, int x, int y, const std::string& text, int scale, const Color& color) {
  const auto& g = glyphs();
  for (char ch : text) {
    const char key = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const auto it = g.find(key);
    const auto& rows = it != g.end() ? it->second : g.at('_');
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 3; ++c)
        if (rows[r] & (4 >> c)) fill_rect(image, x + c * scale, y + r * scale, x + (c + 1) * scale - 1, y + (r + 1) * scale - 1, color);
    x += 4 * scale;
  }
}

RgbImage line_chart(const std::vector<Series>& series, const ChartSpec& spec) {
  RgbImage img(spec.height, spec.width, 3, 1.0);
  const int left = 90, right = spec.width - 20, top = 40, bottom = spec.height - 60;

  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!spec.log_y || y > 0); };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  if (!spec.x_ticks.empty()) {
    xmin = std::min(xmin, 0.0);
    xmax = std::max(xmax, static_cast<double>(spec.x_ticks.size() - 1));
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  if (!spec.x_ticks.empty()) xmin -= 0.25, xmax += 0.25;

  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (right - left))); };
  auto py = [&](double y) { return bottom - static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * (bottom - top))); };

  // Grid and tick labels.
  std::vector<double> yt;
  if (spec.log_y) {
    for (double e = std::ceil(ymin); e <= ymax; e += 1.0) yt.push_back(e);
    if (yt.size() < 2) yt = nice_ticks(ymin, ymax, 5);
  } else {
    yt = nice_ticks(ymin, ymax, 6);
  }
  for (double v : yt) {
    const int y = py(v);
    line(img, left, y, right, y, kGrid, 1);
    const auto label = tick_label(spec.log_y ? std::pow(10.0, v) : v);
    draw_text(img, left - 8 - text_width(label, 2), y - 5, label, 2, kBlack);
  }
  if (spec.x_ticks.empty()) {
    for (double v : nice_ticks(xmin, xmax, 6)) {
      const int x = px(v);
      line(img, x, top, x, bottom, kGrid, 1);
      const auto label = tick_label(v);
      draw_text(img, x - text_width(label, 2) / 2, bottom + 8, label, 2, kBlack);
    }
  } else {
    for (std::size_t i = 0; i < spec.x_ticks.size(); ++i) {
      const int x = px(static_cast<double>(i));
      line(img, x, top, x, bottom, kGrid, 1);
      draw_text(img, x - text_width(spec.x_ticks[i], 2) / 2, bottom + 8, spec.x_ticks[i], 2, kBlack);
    }
  }
  line(img, left, top, left, bottom, kBlack, 1);
  line(img, left, bottom, right, bottom, kBlack, 1);

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& c = kSeriesColors[s % kSeriesColors.size()];
    int prev_x = 0, prev_y = 0;
    bool have_prev = false;
    const auto& sr = series[s];
    for (std::size_t i = 0; i < std::min(sr.x.size(), sr.y.size()); ++i) {
      if (!usable(sr.x[i], sr.y[i])) {
        have_prev = false;
        continue;
      }
      const int x = px(sr.x[i]), y = py(ty(sr.y[i]));
      if (have_prev) line(img, prev_x, prev_y, x, y, c, 2);
      if (!spec.x_ticks.empty()) fill_rect(img, x - 3, y - 3, x + 3, y + 3, c);
      prev_x = x, prev_y = y, have_prev = true;
    }
  }

  // Legend in the top-right corner of the plot area.
  int legend_w = 0;
  for (const auto& s : series) legend_w = std::max(legend_w, text_width(s.name, 2));
  const int lx = right - legend_w - 40;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const int y = top + 8 + static_cast<int>(s) * 16;
    fill_rect(img, lx, y + 3, lx + 20, y + 5, kSeriesColors[s % kSeriesColors.size()]);
    draw_text(img, lx + 28, y, series[s].name, 2, kBlack);
  }

  draw_text(img, (spec.width - text_width(spec.title, 3)) / 2, 10, spec.title, 3, kBlack);
  draw_text(img, (left + right - text_width(spec.x_label, 2)) / 2, spec.height - 28, spec.x_label, 2, kBlack);
  draw_text(img, 8, top - 20, spec.y_label, 2, kBlack);
  return img;
}

}  // namespace repcycle::plot
