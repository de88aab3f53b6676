#include "gr1/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gr1 {

namespace {

constexpr int kWidth = 640, kHeight = 420;
constexpr int kLeft = 70, kRight = 20, kTop = 50, kBottom = 60;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

const char* kCurveColors[] = {"#3366cc", "#cc3333", "#33a02c",
                              "#9933cc", "#cc8800", "#008888"};

void header(std::ostringstream& s, const std::string& title) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
    << "\" height=\"" << kHeight << "\">\n";
  s << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << kWidth / 2
    << "\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" "
       "text-anchor=\"middle\">"
    << title << "</text>\n";
}

void y_axis(std::ostringstream& s, double y_max, const std::string& y_label) {
  const int plot_h = kHeight - kTop - kBottom;
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
    << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double v = y_max * i / 4.0;
    int y = kTop + plot_h - int(std::lround(plot_h * (v / y_max)));
    s << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << y << "\" x2=\"" << kLeft
      << "\" y2=\"" << y << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
      << "\" font-family=\"sans-serif\" font-size=\"11\" "
         "text-anchor=\"end\">"
      << fmt(v) << "</text>\n";
  }
  s << "<text x=\"16\" y=\"" << kTop + plot_h / 2
    << "\" font-family=\"sans-serif\" font-size=\"12\" "
       "text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << kTop + plot_h / 2 << ")\">" << y_label << "</text>\n";
}

}  // namespace

std::string render_bar_chart_svg(const std::string& title,
                                 const std::vector<BarDatum>& bars,
                                 const std::string& y_label) {
  if (bars.empty())
    throw std::invalid_argument("render_bar_chart_svg: no data");
  double y_max = 0;
  for (const auto& b : bars) y_max = std::max(y_max, b.value + b.err);
  if (y_max <= 0) y_max = 1;
  y_max *= 1.15;

  const int plot_w = kWidth - kLeft - kRight;
  const int plot_h = kHeight - kTop - kBottom;
  std::ostringstream s;
  header(s, title);
  y_axis(s, y_max, y_label);
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\""
    << kLeft + plot_w << "\" y2=\"" << kTop + plot_h
    << "\" stroke=\"black\"/>\n";

  const int n = int(bars.size());
  const double slot = double(plot_w) / n;
  const double bw = slot * 0.6;
  for (int i = 0; i < n; ++i) {
    const auto& b = bars[size_t(i)];
    double cx = kLeft + slot * (i + 0.5);
    int h = int(std::lround(plot_h * (b.value / y_max)));
    int x0 = int(std::lround(cx - bw / 2));
    int y0 = kTop + plot_h - h;
    s << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\""
      << int(std::lround(bw)) << "\" height=\"" << h
      << "\" fill=\"#4477aa\"/>\n";
    if (b.err > 0) {
      int ytopp = kTop + plot_h -
                  int(std::lround(plot_h * ((b.value + b.err) / y_max)));
      int ybot = kTop + plot_h -
                 int(std::lround(plot_h * std::max(0.0, (b.value - b.err)) /
                                 y_max));
      int icx = int(std::lround(cx));
      s << "<line x1=\"" << icx << "\" y1=\"" << ytopp << "\" x2=\"" << icx
        << "\" y2=\"" << ybot << "\" stroke=\"black\"/>\n";
      s << "<line x1=\"" << icx - 5 << "\" y1=\"" << ytopp << "\" x2=\""
        << icx + 5 << "\" y2=\"" << ytopp << "\" stroke=\"black\"/>\n";
      s << "<line x1=\"" << icx - 5 << "\" y1=\"" << ybot << "\" x2=\""
        << icx + 5 << "\" y2=\"" << ybot << "\" stroke=\"black\"/>\n";
    }
    s << "<text x=\"" << int(std::lround(cx)) << "\" y=\""
      << kTop + plot_h + 18
      << "\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\">"
      << b.label << "</text>\n";
    s << "<text x=\"" << int(std::lround(cx)) << "\" y=\"" << y0 - 6
      << "\" font-family=\"sans-serif\" font-size=\"11\" "
         "text-anchor=\"middle\">"
      << fmt(b.value) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string render_curve_chart_svg(const std::string& title,
                                   const std::vector<CurveDatum>& curves,
                                   const std::string& x_label,
                                   const std::string& y_label) {
  if (curves.empty())
    throw std::invalid_argument("render_curve_chart_svg: no data");
  size_t npts = 0;
  double y_max = 0;
  for (const auto& c : curves) {
    npts = std::max(npts, c.values.size());
    for (double v : c.values) y_max = std::max(y_max, v);
  }
  if (npts < 1)
    throw std::invalid_argument("render_curve_chart_svg: empty curves");
  if (y_max <= 0) y_max = 1;
  y_max *= 1.15;

  const int plot_w = kWidth - kLeft - kRight;
  const int plot_h = kHeight - kTop - kBottom;
  std::ostringstream s;
  header(s, title);
  y_axis(s, y_max, y_label);
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\""
    << kLeft + plot_w << "\" y2=\"" << kTop + plot_h
    << "\" stroke=\"black\"/>\n";

  for (size_t i = 0; i < npts; ++i) {
    int x = kLeft + int(std::lround(plot_w * (npts == 1 ? 0.5 : double(i) / double(npts - 1))));
    s << "<text x=\"" << x << "\" y=\"" << kTop + plot_h + 18
      << "\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\">"
      << (i + 1) << "</text>\n";
  }
  s << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 14
    << "\" font-family=\"sans-serif\" font-size=\"12\" "
       "text-anchor=\"middle\">"
    << x_label << "</text>\n";

  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci];
    const char* color = kCurveColors[ci % 6];
    std::ostringstream pts;
    for (size_t i = 0; i < c.values.size(); ++i) {
      int x = kLeft +
              int(std::lround(plot_w * (c.values.size() == 1
                                            ? 0.5
                                            : double(i) / double(c.values.size() - 1))));
      int y = kTop + plot_h -
              int(std::lround(plot_h * (c.values[i] / y_max)));
      if (i) pts << " ";
      pts << x << "," << y;
    }
    s << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
      << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << kLeft + plot_w - 6 << "\" y=\""
      << kTop + 16 + int(ci) * 16
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" "
         "fill=\""
      << color << "\">" << c.label << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace gr1
