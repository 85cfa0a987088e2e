#pragma once

#include <string>
#include <vector>

namespace biaslens {

enum class PlotKind { kde_lines, bar, sweep_line };

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  PlotKind kind = PlotKind::kde_lines;
  std::vector<Series> series;
  std::string title;
  std::string x_label;
  std::string y_label;
  /// Optional vertical tick marks drawn along the x axis (e.g. misclassified samples).
  std::vector<double> markers;

  /// Throws UsageError when empty or when a line series is not strictly increasing in x.
  void validate() const;
};

/// Standalone SVG 1.1 document. Line kinds draw one <path> per series; bars
/// use <rect>. Output is a pure function of the spec.
std::string render_svg(const PlotSpec& plot);
void emit_svg(const PlotSpec& plot, const std::string& path);

}  // namespace biaslens
