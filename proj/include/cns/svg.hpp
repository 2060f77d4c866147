#pragma once

#include <string>
#include <vector>

namespace cns {

/// Minimal self-contained SVG charts for the analysis reports.
struct SvgSeries {
    std::string label;
    std::vector<double> y;
};

/// Polyline chart of one or more series against a shared x axis.
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<double>& x, const std::vector<SvgSeries>& series,
                          bool log_y = false);

/// Heat map of a rows x cols matrix as a grid of rectangles (values in [0,1]).
void write_heatmap_svg(const std::string& path, const std::string& title,
                       const std::vector<std::vector<double>>& matrix);

}  // namespace cns
