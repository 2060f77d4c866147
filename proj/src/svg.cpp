#include "cns/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cns/text.hpp"

namespace cns {

namespace {

constexpr int kWidth = 640, kHeight = 400, kPad = 48;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

struct Range {
    double lo, hi;
    double map(double v, double out_lo, double out_hi) const {
        const double w = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        return out_lo + w * (out_hi - out_lo);
    }
};

}  // namespace

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<double>& x, const std::vector<SvgSeries>& series,
                          bool log_y) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_line_chart_svg: cannot open " + path);
    auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };

    Range rx{x.empty() ? 0.0 : x.front(), x.empty() ? 1.0 : x.back()};
    double lo = 0.0, hi = 1.0;
    bool first = true;
    for (const auto& s : series)
        for (double v : s.y) {
            const double w = ty(v);
            if (!std::isfinite(w)) continue;
            if (first) {
                lo = hi = w;
                first = false;
            } else {
                lo = std::min(lo, w);
                hi = std::max(hi, w);
            }
        }
    if (hi <= lo) hi = lo + 1.0;
    Range ry{lo, hi};

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << title << "</text>\n";
    out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kWidth - 2 * kPad
        << "\" height=\"" << kHeight - 2 * kPad << "\" fill=\"none\" stroke=\"#888\"/>\n";

    for (size_t s = 0; s < series.size(); ++s) {
        out << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 6]
            << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < x.size() && i < series[s].y.size(); ++i) {
            const double vy = ty(series[s].y[i]);
            if (!std::isfinite(vy)) continue;
            out << rx.map(x[i], kPad, kWidth - kPad) << ','
                << ry.map(vy, kHeight - kPad, kPad) << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << kWidth - kPad + 4 << "\" y=\"" << kPad + 16 * (s + 1)
            << "\" font-size=\"11\" fill=\"" << kPalette[s % 6] << "\">" << series[s].label
            << "</text>\n";
    }
    out << "<text x=\"" << kPad << "\" y=\"" << kHeight - kPad + 16 << "\" font-size=\"11\">"
        << format_double(rx.lo) << "</text>\n";
    out << "<text x=\"" << kWidth - kPad << "\" y=\"" << kHeight - kPad + 16
        << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(rx.hi) << "</text>\n";
    out << "<text x=\"" << kPad - 4 << "\" y=\"" << kHeight - kPad
        << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(ry.lo) << "</text>\n";
    out << "<text x=\"" << kPad - 4 << "\" y=\"" << kPad + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(ry.hi) << "</text>\n";
    out << "</svg>\n";
}

void write_heatmap_svg(const std::string& path, const std::string& title,
                       const std::vector<std::vector<double>>& matrix) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_heatmap_svg: cannot open " + path);
    const int rows = static_cast<int>(matrix.size());
    const int cols = rows > 0 ? static_cast<int>(matrix[0].size()) : 0;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << title << "</text>\n";
    if (rows > 0 && cols > 0) {
        const double cw = static_cast<double>(kWidth - 2 * kPad) / cols;
        const double ch = static_cast<double>(kHeight - 2 * kPad) / rows;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols && c < static_cast<int>(matrix[r].size()); ++c) {
                const double v = std::clamp(matrix[r][c], 0.0, 1.0);
                const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
                out << "<rect x=\"" << kPad + c * cw << "\" y=\"" << kPad + r * ch
                    << "\" width=\"" << cw + 0.5 << "\" height=\"" << ch + 0.5
                    << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\"/>\n";
            }
    }
    out << "</svg>\n";
}

}  // namespace cns
