#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

// Minimal SVG charts: axes, bars, polylines and labels. The JSON results are
// the canonical output; these are for looking at.

namespace cxai::svg {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

inline const char* color(std::size_t k) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[k % 10];
}

struct Canvas {
  double width, height;
  std::ostringstream body;

  Canvas(double w, double h) : width(w), height(h) {}

  void text(double x, double y, const std::string& s, const char* anchor = "start", int size = 11) {
    body << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size << "\" text-anchor=\""
         << anchor << "\">" << escape(s) << "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke = "#000") {
    body << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
         << "\" stroke=\"" << stroke << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const char* fill) {
    body << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(std::max(w, 0.0))
         << "\" height=\"" << num(std::max(h, 0.0)) << "\" fill=\"" << fill << "\"/>\n";
  }
  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" font-family=\"sans-serif\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
        << body.str() << "</svg>\n";
    return out.str();
  }
};

inline std::pair<double, double> padded_range(double lo, double hi) {
  if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace detail

/// Horizontal bars, one per label, drawn in the given order.
inline std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                             const std::vector<double>& values, const std::string& axis_label = "") {
  const double left = 160, right = 40, top = 40, bar_h = 18, gap = 6;
  const double plot_w = 420;
  const double height = top + static_cast<double>(labels.size()) * (bar_h + gap) + 50;
  detail::Canvas c(left + plot_w + right, height);
  c.text((left + plot_w) / 2, 22, title, "middle", 14);
  double lo = 0, hi = 0;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) hi = lo + 1;
  const auto x_of = [&](double v) { return left + (v - lo) / (hi - lo) * plot_w; };
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double y = top + static_cast<double>(k) * (bar_h + gap);
    const double x0 = x_of(0), x1 = x_of(values[k]);
    c.rect(std::min(x0, x1), y, std::abs(x1 - x0), bar_h, values[k] >= 0 ? detail::color(0) : detail::color(1));
    c.text(left - 6, y + bar_h - 5, labels[k], "end");
    c.text(std::max(x0, x1) + 4, y + bar_h - 5, detail::label(values[k]));
  }
  const double axis_y = top + static_cast<double>(labels.size()) * (bar_h + gap);
  c.line(left, axis_y, left + plot_w, axis_y);
  c.line(x_of(0), top - 4, x_of(0), axis_y);
  c.text(left, axis_y + 16, detail::label(lo), "middle");
  c.text(left + plot_w, axis_y + 16, detail::label(hi), "middle");
  if (!axis_label.empty()) c.text(left + plot_w / 2, axis_y + 34, axis_label, "middle");
  return c.str();
}

struct Series {
  std::string name;
  std::vector<double> x, y;
};

/// Overlaid polylines with a legend.
inline std::string line_chart(const std::string& title, const std::vector<Series>& series,
                              const std::string& x_label = "", const std::string& y_label = "") {
  const double left = 70, right = 160, top = 40, bottom = 60, plot_w = 480, plot_h = 300;
  detail::Canvas c(left + plot_w + right, top + plot_h + bottom);
  c.text(left + plot_w / 2, 22, title, "middle", 14);
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    for (double v : s.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
    for (double v : s.y) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
  }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  std::tie(xlo, xhi) = detail::padded_range(xlo, xhi);
  std::tie(ylo, yhi) = detail::padded_range(ylo, yhi);
  const auto px = [&](double v) { return left + (v - xlo) / (xhi - xlo) * plot_w; };
  const auto py = [&](double v) { return top + plot_h - (v - ylo) / (yhi - ylo) * plot_h; };
  c.line(left, top + plot_h, left + plot_w, top + plot_h);
  c.line(left, top, left, top + plot_h);
  for (int t = 0; t <= 4; ++t) {
    const double xv = xlo + (xhi - xlo) * t / 4, yv = ylo + (yhi - ylo) * t / 4;
    c.text(px(xv), top + plot_h + 16, detail::label(xv), "middle");
    c.text(left - 6, py(yv) + 4, detail::label(yv), "end");
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    c.body << "<polyline fill=\"none\" stroke=\"" << detail::color(k) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) c.body << detail::num(px(s.x[i])) << ',' << detail::num(py(s.y[i])) << ' ';
    c.body << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(k);
    c.line(left + plot_w + 12, ly - 4, left + plot_w + 32, ly - 4, detail::color(k));
    c.text(left + plot_w + 36, ly, s.name);
  }
  if (!x_label.empty()) c.text(left + plot_w / 2, top + plot_h + 40, x_label, "middle");
  if (!y_label.empty()) c.text(14, top + plot_h / 2, y_label, "start");
  return c.str();
}

/// Break Down waterfall: the intercept bar, one floating bar per signed
/// contribution, then the final prediction bar.
inline std::string waterfall(const std::string& title, double intercept,
                             const std::vector<std::pair<std::string, double>>& steps, double final_value) {
  std::vector<double> level{intercept};
  for (const auto& [_, d] : steps) level.push_back(level.back() + d);
  double lo = std::min(0.0, *std::min_element(level.begin(), level.end()));
  double hi = std::max({0.0, *std::max_element(level.begin(), level.end()), final_value});
  if (hi == lo) hi = lo + 1;
  const double left = 180, right = 60, top = 40, bar_h = 18, gap = 6, plot_w = 400;
  const std::size_t n_bars = steps.size() + 2;
  detail::Canvas c(left + plot_w + right, top + static_cast<double>(n_bars) * (bar_h + gap) + 40);
  c.text((left + plot_w) / 2, 22, title, "middle", 14);
  const auto x_of = [&](double v) { return left + (v - lo) / (hi - lo) * plot_w; };
  auto bar = [&](std::size_t k, double from, double to, const char* fill, const std::string& name, double shown) {
    const double y = top + static_cast<double>(k) * (bar_h + gap);
    const double a = x_of(from), b = x_of(to);
    c.rect(std::min(a, b), y, std::max(std::abs(b - a), 1.0), bar_h, fill);
    c.text(left - 6, y + bar_h - 5, name, "end");
    c.text(std::max(a, b) + 4, y + bar_h - 5, detail::label(shown));
  };
  bar(0, 0, intercept, "#7f7f7f", "intercept", intercept);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const double d = steps[k].second;
    bar(k + 1, level[k], level[k + 1], d >= 0 ? detail::color(1) : detail::color(2), steps[k].first, d);
  }
  bar(n_bars - 1, 0, final_value, "#1f77b4", "prediction", final_value);
  const double axis_y = top + static_cast<double>(n_bars) * (bar_h + gap);
  c.line(left, axis_y, left + plot_w, axis_y);
  c.text(left, axis_y + 16, detail::label(lo), "middle");
  c.text(left + plot_w, axis_y + 16, detail::label(hi), "middle");
  return c.str();
}

}  // namespace cxai::svg
