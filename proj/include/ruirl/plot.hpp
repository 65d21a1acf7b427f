// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ruirl/types.hpp"

namespace ruirl {

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline void write_svg(const std::string& path, const std::string& body, int width,
                      int height) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << body << "</svg>\n";
}

}  // namespace detail

/// Trace plot of a scalar chain as an SVG polyline.
inline void plot_trace(const std::vector<double>& values, const std::string& title,
                       const std::string& path) {
  if (values.empty()) throw EmptyInput("nothing to plot");
  const int w = 900, h = 300, margin = 40;
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (hi == lo) hi = lo + 1.0;
  std::string body = "<text x=\"10\" y=\"20\" font-family=\"monospace\" font-size=\"14\">" +
                     title + "</text>\n<polyline fill=\"none\" stroke=\"steelblue\" "
                     "stroke-width=\"1\" points=\"";
  const double dx = static_cast<double>(w - 2 * margin) /
                    static_cast<double>(std::max<std::size_t>(values.size() - 1, 1));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = margin + dx * static_cast<double>(i);
    const double y = h - margin - (values[i] - lo) / (hi - lo) * (h - 2 * margin);
    body += detail::svg_num(x) + "," + detail::svg_num(y) + " ";
  }
  body += "\"/>\n";
  body += "<text x=\"10\" y=\"" + std::to_string(h - 8) +
          "\" font-family=\"monospace\" font-size=\"11\">min " + detail::svg_num(lo) +
          "  max " + detail::svg_num(hi) + "</text>\n";
  detail::write_svg(path, body, w, h);
}

/// Histogram of a sample as SVG bars (40 equal-width bins).
inline void plot_histogram(const std::vector<double>& values, const std::string& title,
                           const std::string& path) {
  if (values.empty()) throw EmptyInput("nothing to plot");
  const int w = 600, h = 300, margin = 40, bins = 40;
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (hi == lo) hi = lo + 1.0;
  std::vector<int> counts(bins, 0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    ++counts[b];
  }
  const int peak = *std::max_element(counts.begin(), counts.end());
  std::string body = "<text x=\"10\" y=\"20\" font-family=\"monospace\" font-size=\"14\">" +
                     title + "</text>\n";
  const double bw = static_cast<double>(w - 2 * margin) / bins;
  for (int b = 0; b < bins; ++b) {
    const double bar = static_cast<double>(counts[b]) / peak * (h - 2 * margin);
    body += "<rect x=\"" + detail::svg_num(margin + b * bw) + "\" y=\"" +
            detail::svg_num(h - margin - bar) + "\" width=\"" + detail::svg_num(bw - 1) +
            "\" height=\"" + detail::svg_num(bar) + "\" fill=\"steelblue\"/>\n";
  }
  body += "<text x=\"10\" y=\"" + std::to_string(h - 8) +
          "\" font-family=\"monospace\" font-size=\"11\">range [" + detail::svg_num(lo) +
          ", " + detail::svg_num(hi) + "]</text>\n";
  detail::write_svg(path, body, w, h);
}

}  // namespace ruirl
