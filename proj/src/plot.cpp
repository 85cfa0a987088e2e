#include "biaslens/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "biaslens/error.hpp"

namespace biaslens {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 16.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 48.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

}  // namespace

void PlotSpec::validate() const {
  if (series.empty()) throw UsageError("plot has no series");
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size()) throw UsageError("plot series '" + s.name + "' is empty or ragged");
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
        throw UsageError("plot series '" + s.name + "' has non-finite values");
    if (kind != PlotKind::bar)
      for (std::size_t i = 1; i < s.x.size(); ++i)
        if (!(s.x[i] > s.x[i - 1])) throw UsageError("plot series '" + s.name + "' x is not strictly increasing");
  }
}

std::string render_svg(const PlotSpec& plot) {
  plot.validate();
  Range xr, yr;
  for (const auto& s : plot.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  if (plot.kind == PlotKind::bar) {
    yr.add(0.0);
    xr.add(xr.lo - 0.5);
    xr.add(xr.hi + 0.5);
  }
  xr.finish();
  yr.finish();
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sy = [&](double v) { return kTop + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         escape(plot.title) + "</text>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
         num(kTop + ph) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(kTop + ph) +
         "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xr.lo + (xr.hi - xr.lo) * t / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * t / 4.0;
    svg += "<text x=\"" + num(sx(xv)) + "\" y=\"" + num(kTop + ph + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + num(xv) + "</text>\n";
    svg += "<text x=\"" + num(kLeft - 4) + "\" y=\"" + num(sy(yv) + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(yv) + "</text>\n";
  }
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 8) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(plot.x_label) + "</text>\n";
  svg += "<text x=\"14\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" " +
         "font-size=\"12\" transform=\"rotate(-90 14 " + num(kTop + ph / 2) + ")\">" + escape(plot.y_label) +
         "</text>\n";

  const std::size_t ns = plot.series.size();
  for (std::size_t k = 0; k < ns; ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (plot.kind == PlotKind::bar) {
      const double slot = pw / (xr.hi - xr.lo) * 0.8 / static_cast<double>(ns);
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double x0 = sx(s.x[i]) - 0.4 * pw / (xr.hi - xr.lo) + slot * static_cast<double>(k);
        const double top = std::min(sy(s.y[i]), sy(0.0));
        const double h = std::abs(sy(s.y[i]) - sy(0.0));
        svg += "<rect x=\"" + num(x0) + "\" y=\"" + num(top) + "\" width=\"" + num(slot) + "\" height=\"" + num(h) +
               "\" fill=\"" + color + "\"/>\n";
      }
    } else {
      svg += "<path fill=\"none\" stroke=\"";
      svg += color;
      svg += "\" stroke-width=\"1.5\" d=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        svg += i == 0 ? "M" : " L";
        svg += num(sx(s.x[i])) + " " + num(sy(s.y[i]));
      }
      svg += "\"/>\n";
      if (plot.kind == PlotKind::sweep_line)
        for (std::size_t i = 0; i < s.x.size(); ++i)
          svg += "<circle cx=\"" + num(sx(s.x[i])) + "\" cy=\"" + num(sy(s.y[i])) + "\" r=\"2.5\" fill=\"" + color +
                 "\"/>\n";
    }
    svg += "<text x=\"" + num(kLeft + pw - 4) + "\" y=\"" + num(kTop + 14 + 14 * static_cast<double>(k)) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + color + "\">" +
           escape(s.name) + "</text>\n";
  }
  for (double m : plot.markers) {
    if (m < xr.lo || m > xr.hi) continue;
    svg += "<line x1=\"" + num(sx(m)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(sx(m)) + "\" y2=\"" +
           num(kTop + ph - 6) + "\" stroke=\"black\" stroke-opacity=\"0.4\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void emit_svg(const PlotSpec& plot, const std::string& path) {
  const std::string svg = render_svg(plot);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << svg;
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace biaslens
