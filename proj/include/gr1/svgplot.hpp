#pragma once

#include <string>
#include <vector>

namespace gr1 {

// Minimal deterministic SVG charts: identical inputs produce byte-identical
// files.

struct BarDatum {
  std::string label;
  double value = 0;
  double err = 0;  // symmetric error bar; 0 draws none
};

std::string render_bar_chart_svg(const std::string& title,
                                 const std::vector<BarDatum>& bars,
                                 const std::string& y_label);

struct CurveDatum {
  std::string label;
  std::vector<double> values;  // y at x = 1..n
};

std::string render_curve_chart_svg(const std::string& title,
                                   const std::vector<CurveDatum>& curves,
                                   const std::string& x_label,
                                   const std::string& y_label);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace gr1
