#include "evtrap/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "evtrap/errors.hpp"
#include "evtrap/format.hpp"

namespace evtrap {

namespace {

constexpr double kLeft = 70, kRight = 20, kTop = 36, kBottom = 50;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
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

std::string p(double v) { return fmt(std::round(v * 100.0) / 100.0); }

void header(std::ostringstream& os, const PlotOptions& o) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!o.title.empty())
    os << "<text x=\"" << p(o.width / 2.0) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(o.title) << "</text>\n";
  double pw = o.width - kLeft - kRight, ph = o.height - kTop - kBottom;
  os << "<text x=\"" << p(kLeft + pw / 2) << "\" y=\"" << p(o.height - 10.0)
     << "\" text-anchor=\"middle\">" << escape(o.xlabel) << "</text>\n";
  os << "<text transform=\"translate(16," << p(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(o.ylabel) << "</text>\n";
}

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;
  double map(double v) const {
    double a = log ? std::log10(v) : v;
    return (a - lo) / (hi - lo);
  }
  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (double e = std::ceil(lo); e <= hi + 1e-9; e += std::max(1.0, std::floor((hi - lo) / 6.0)))
        t.push_back(std::pow(10.0, e));
      return t;
    }
    double span = hi - lo;
    double step = std::pow(10.0, std::floor(std::log10(span / 5.0)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (span / (step * m) <= 7.0) {
        step *= m;
        break;
      }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step)
      t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
    return t;
  }
};

Axis make_axis(double lo, double hi, bool log) {
  Axis a;
  a.log = log;
  if (log) {
    lo = std::log10(lo);
    hi = std::log10(hi);
  }
  if (!(hi > lo)) {
    double d = std::abs(lo) > 0 ? 0.05 * std::abs(lo) : 1.0;
    lo -= d;
    hi += d;
  } else if (!log) {
    double pad = 0.03 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  a.lo = lo;
  a.hi = hi;
  return a;
}

bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }

}  // namespace

std::string svg_line_plot(const std::vector<Series>& series, const PlotOptions& o) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw DomainError("series x and y differ in size");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], o.log_x) || !usable(s.y[i], o.log_y)) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  if (!(xlo <= xhi)) {
    xlo = ylo = o.log_x ? 1.0 : 0.0;
    xhi = yhi = o.log_x ? 10.0 : 1.0;
  }
  Axis ax = make_axis(xlo, xhi, o.log_x), ay = make_axis(ylo, yhi, o.log_y);
  double pw = o.width - kLeft - kRight, ph = o.height - kTop - kBottom;
  auto X = [&](double v) { return kLeft + ax.map(v) * pw; };
  auto Y = [&](double v) { return kTop + (1.0 - ay.map(v)) * ph; };

  std::ostringstream os;
  header(os, o);
  os << "<rect x=\"" << p(kLeft) << "\" y=\"" << p(kTop) << "\" width=\"" << p(pw) << "\" height=\"" << p(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    double x = X(t);
    os << "<line x1=\"" << p(x) << "\" y1=\"" << p(kTop + ph) << "\" x2=\"" << p(x) << "\" y2=\""
       << p(kTop + ph + 5) << "\" stroke=\"black\"/><text x=\"" << p(x) << "\" y=\"" << p(kTop + ph + 18)
       << "\" text-anchor=\"middle\">" << fmt(t, 4) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    double y = Y(t);
    os << "<line x1=\"" << p(kLeft - 5) << "\" y1=\"" << p(y) << "\" x2=\"" << p(kLeft) << "\" y2=\"" << p(y)
       << "\" stroke=\"black\"/><text x=\"" << p(kLeft - 8) << "\" y=\"" << p(y + 4)
       << "\" text-anchor=\"end\">" << fmt(t, 4) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], o.log_x) || !usable(s.y[i], o.log_y)) continue;
      os << (first ? "" : " ") << p(X(s.x[i])) << ',' << p(Y(s.y[i]));
      first = false;
    }
    os << "\"/>\n";
    if (!s.label.empty())
      os << "<text x=\"" << p(kLeft + pw - 6) << "\" y=\"" << p(kTop + 16 + 15.0 * k) << "\" text-anchor=\"end\" fill=\""
         << color << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_heatmap(const std::vector<double>& values, std::size_t rows, std::size_t cols,
                        const std::vector<double>& row_values, const std::vector<double>& col_values,
                        const PlotOptions& o, double vmin, double vmax) {
  if (values.size() != rows * cols) throw DomainError("heatmap values do not match its shape");
  double pw = o.width - kLeft - kRight - 60, ph = o.height - kTop - kBottom;
  std::ostringstream os;
  header(os, o);
  if (rows == 0 || cols == 0) {
    os << "</svg>\n";
    return os.str();
  }
  double cw = pw / cols, rh = ph / rows;
  auto color = [&](double v) {
    if (!std::isfinite(v)) return std::string("#cccccc");
    double f = std::clamp((v - vmin) / (vmax - vmin), 0.0, 1.0);
    // White to dark blue.
    int r = static_cast<int>(std::lround(255 - f * (255 - 8)));
    int g = static_cast<int>(std::lround(255 - f * (255 - 48)));
    int b = static_cast<int>(std::lround(255 - f * (255 - 107)));
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      os << "<rect x=\"" << p(kLeft + j * cw) << "\" y=\"" << p(kTop + (rows - 1 - i) * rh) << "\" width=\""
         << p(cw + 0.3) << "\" height=\"" << p(rh + 0.3) << "\" fill=\"" << color(values[i * cols + j])
         << "\"/>\n";
  os << "<rect x=\"" << p(kLeft) << "\" y=\"" << p(kTop) << "\" width=\"" << p(pw) << "\" height=\"" << p(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  std::size_t cstep = std::max<std::size_t>(1, cols / 6), rstep = std::max<std::size_t>(1, rows / 6);
  for (std::size_t j = 0; j < cols && j < col_values.size(); j += cstep)
    os << "<text x=\"" << p(kLeft + (j + 0.5) * cw) << "\" y=\"" << p(kTop + ph + 18)
       << "\" text-anchor=\"middle\">" << fmt(col_values[j], 3) << "</text>\n";
  for (std::size_t i = 0; i < rows && i < row_values.size(); i += rstep)
    os << "<text x=\"" << p(kLeft - 8) << "\" y=\"" << p(kTop + (rows - 0.5 - i) * rh + 4)
       << "\" text-anchor=\"end\">" << fmt(row_values[i], 3) << "</text>\n";
  double bx = kLeft + pw + 20;
  for (int k = 0; k < 20; ++k) {
    double f = (k + 0.5) / 20.0;
    os << "<rect x=\"" << p(bx) << "\" y=\"" << p(kTop + ph * (1.0 - (k + 1) / 20.0)) << "\" width=\"14\" height=\""
       << p(ph / 20.0 + 0.3) << "\" fill=\"" << color(vmin + f * (vmax - vmin)) << "\"/>\n";
  }
  os << "<text x=\"" << p(bx + 18) << "\" y=\"" << p(kTop + 10) << "\">" << fmt(vmax, 3) << "</text>\n";
  os << "<text x=\"" << p(bx + 18) << "\" y=\"" << p(kTop + ph) << "\">" << fmt(vmin, 3) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace evtrap
