#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "neurashed/csv.hpp"
#include "neurashed/errors.hpp"

namespace neurashed {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct BarGroup {
    std::string label; // one group of bars, e.g. a test class
    std::vector<std::pair<std::string, double>> bars;
};

namespace detail {

inline const char* series_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

// Round tick step to 1/2/5 times a power of ten.
inline double nice_step(double span, int target_ticks) {
    if (!(span > 0.0)) return 1.0;
    double raw = span / target_ticks;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double norm = raw / mag;
    double step = norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0;
    return step * mag;
}

struct Axis {
    double lo, hi;
    std::vector<double> ticks;
};

inline Axis make_axis(double lo, double hi) {
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    double step = nice_step(hi - lo, 5);
    double first = std::ceil(lo / step) * step;
    Axis axis{lo, hi, {}};
    for (double t = first; t <= hi + step * 1e-9; t += step) axis.ticks.push_back(t == 0.0 ? 0.0 : t);
    return axis;
}

inline std::string svg_header(int width, int height) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
           "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string text_element(double x, double y, const std::string& s, const std::string& extra = "") {
    return "<text x=\"" + format_double(x) + "\" y=\"" + format_double(y) +
           "\" font-family=\"sans-serif\" font-size=\"12\"" + extra + ">" + s + "</text>\n";
}

} // namespace detail

// Standalone line chart: axes, tick labels, legend, one polyline per series.
// Output depends only on the inputs, so identical calls give identical bytes.
inline std::string render_svg_line_chart(const std::vector<Series>& series, const std::string& title,
                                         const std::string& xlabel, const std::string& ylabel) {
    if (series.empty()) fail(ErrorCode::EmptySeries, "line chart needs at least one series");
    for (const auto& s : series)
        if (s.points.empty()) fail(ErrorCode::EmptySeries, "series \"" + s.label + "\" has no points");

    const int width = 800, height = 500;
    const double left = 70, right = 160, top = 50, bottom = 60;
    const double plot_w = width - left - right, plot_h = height - top - bottom;

    double xmin = series[0].points[0].first, xmax = xmin;
    double ymin = series[0].points[0].second, ymax = ymin;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    detail::Axis xaxis = detail::make_axis(xmin, xmax);
    detail::Axis yaxis = detail::make_axis(ymin, ymax);

    auto sx = [&](double x) { return left + (x - xaxis.lo) / (xaxis.hi - xaxis.lo) * plot_w; };
    auto sy = [&](double y) { return top + plot_h - (y - yaxis.lo) / (yaxis.hi - yaxis.lo) * plot_h; };

    std::string out = detail::svg_header(width, height);
    out += detail::text_element(left, 28, title, " font-size=\"16\"");

    // axes
    out += "<line x1=\"" + format_double(left) + "\" y1=\"" + format_double(top + plot_h) + "\" x2=\"" +
           format_double(left + plot_w) + "\" y2=\"" + format_double(top + plot_h) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + format_double(left) + "\" y1=\"" + format_double(top) + "\" x2=\"" + format_double(left) +
           "\" y2=\"" + format_double(top + plot_h) + "\" stroke=\"black\"/>\n";
    for (double t : xaxis.ticks) {
        double x = sx(t);
        out += "<line x1=\"" + format_double(x) + "\" y1=\"" + format_double(top + plot_h) + "\" x2=\"" +
               format_double(x) + "\" y2=\"" + format_double(top + plot_h + 5) + "\" stroke=\"black\"/>\n";
        out += detail::text_element(x - 10, top + plot_h + 20, format_double(t));
    }
    for (double t : yaxis.ticks) {
        double y = sy(t);
        out += "<line x1=\"" + format_double(left - 5) + "\" y1=\"" + format_double(y) + "\" x2=\"" +
               format_double(left) + "\" y2=\"" + format_double(y) + "\" stroke=\"black\"/>\n";
        out += detail::text_element(8, y + 4, format_double(t));
    }
    out += detail::text_element(left + plot_w / 2 - 30, height - 15, xlabel);
    out += "<text x=\"20\" y=\"" + format_double(top + plot_h / 2) +
           "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 20 " +
           format_double(top + plot_h / 2) + ")\">" + ylabel + "</text>\n";

    // series and legend
    for (std::size_t i = 0; i < series.size(); ++i) {
        std::string points;
        for (const auto& [x, y] : series[i].points) {
            points += format_double(sx(x)) + "," + format_double(sy(y)) + " ";
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(detail::series_color(i)) +
               "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
        double ly = top + 10 + 18 * static_cast<double>(i);
        out += "<rect x=\"" + format_double(left + plot_w + 14) + "\" y=\"" + format_double(ly - 9) +
               "\" width=\"12\" height=\"12\" fill=\"" + detail::series_color(i) + "\"/>\n";
        out += detail::text_element(left + plot_w + 32, ly + 2, series[i].label, " class=\"legend\"");
    }
    out += "</svg>\n";
    return out;
}

// Grouped histogram: one cluster of bars per group.
inline std::string render_svg_grouped_bars(const std::vector<BarGroup>& groups, const std::string& title,
                                           const std::string& ylabel) {
    if (groups.empty()) fail(ErrorCode::EmptySeries, "histogram needs at least one group");
    std::size_t max_bars = 0;
    double ymax = 0.0;
    for (const auto& g : groups) {
        if (g.bars.empty()) fail(ErrorCode::EmptySeries, "group \"" + g.label + "\" has no bars");
        max_bars = std::max(max_bars, g.bars.size());
        for (const auto& [_, v] : g.bars) ymax = std::max(ymax, v);
    }
    if (ymax == 0.0) ymax = 1.0;

    const int width = 800, height = 500;
    const double left = 70, right = 160, top = 50, bottom = 60;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    detail::Axis yaxis = detail::make_axis(0.0, ymax);
    auto sy = [&](double y) { return top + plot_h - (y - yaxis.lo) / (yaxis.hi - yaxis.lo) * plot_h; };

    std::string out = detail::svg_header(width, height);
    out += detail::text_element(left, 28, title, " font-size=\"16\"");
    out += "<line x1=\"" + format_double(left) + "\" y1=\"" + format_double(top + plot_h) + "\" x2=\"" +
           format_double(left + plot_w) + "\" y2=\"" + format_double(top + plot_h) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + format_double(left) + "\" y1=\"" + format_double(top) + "\" x2=\"" + format_double(left) +
           "\" y2=\"" + format_double(top + plot_h) + "\" stroke=\"black\"/>\n";
    for (double t : yaxis.ticks) {
        double y = sy(t);
        out += "<line x1=\"" + format_double(left - 5) + "\" y1=\"" + format_double(y) + "\" x2=\"" +
               format_double(left) + "\" y2=\"" + format_double(y) + "\" stroke=\"black\"/>\n";
        out += detail::text_element(8, y + 4, format_double(t));
    }
    out += "<text x=\"20\" y=\"" + format_double(top + plot_h / 2) +
           "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 20 " +
           format_double(top + plot_h / 2) + ")\">" + ylabel + "</text>\n";

    double group_w = plot_w / static_cast<double>(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        double gx = left + group_w * static_cast<double>(gi);
        double bar_w = group_w * 0.8 / static_cast<double>(max_bars);
        for (std::size_t bi = 0; bi < g.bars.size(); ++bi) {
            double x = gx + group_w * 0.1 + bar_w * static_cast<double>(bi);
            double y = sy(g.bars[bi].second);
            out += "<rect x=\"" + format_double(x) + "\" y=\"" + format_double(y) + "\" width=\"" +
                   format_double(bar_w * 0.9) + "\" height=\"" + format_double(top + plot_h - y) + "\" fill=\"" +
                   detail::series_color(bi) + "\"/>\n";
        }
        out += detail::text_element(gx + group_w * 0.25, top + plot_h + 20, g.label);
    }
    // legend from the widest group's bar labels
    const BarGroup* widest = &groups[0];
    for (const auto& g : groups)
        if (g.bars.size() > widest->bars.size()) widest = &g;
    for (std::size_t bi = 0; bi < widest->bars.size(); ++bi) {
        double ly = top + 10 + 18 * static_cast<double>(bi);
        out += "<rect x=\"" + format_double(left + plot_w + 14) + "\" y=\"" + format_double(ly - 9) +
               "\" width=\"12\" height=\"12\" fill=\"" + detail::series_color(bi) + "\"/>\n";
        out += detail::text_element(left + plot_w + 32, ly + 2, widest->bars[bi].first, " class=\"legend\"");
    }
    out += "</svg>\n";
    return out;
}

inline void emit_svg_line_chart(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                                const std::string& ylabel, const std::filesystem::path& path) {
    write_file(path, render_svg_line_chart(series, title, xlabel, ylabel));
}

inline void emit_svg_grouped_bars(const std::vector<BarGroup>& groups, const std::string& title,
                                  const std::string& ylabel, const std::filesystem::path& path) {
    write_file(path, render_svg_grouped_bars(groups, title, ylabel));
}

} // namespace neurashed
