#ifndef CAVFB_IO_SVG_PLOT_HPP
#define CAVFB_IO_SVG_PLOT_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cavfb/error.hpp"
#include "cavfb/io/spectrum_file.hpp"

namespace cavfb::io
{
struct PlotStyle
{
    bool x_log = false;
    bool y_log = false;
    bool y_db = false;  // plot 10 log10(y)
    std::optional<double> reference;  // horizontal line, e.g. shot noise at 1
    std::vector<std::string> channels;  // empty: every non-sigma column
    std::string title;
    int width = 720;
    int height = 450;
};

namespace detail
{
inline std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string label_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else if (c == '"') out += "&quot;";
        else out += c;
    }
    return out;
}

inline std::vector<double> linear_ticks(double lo, double hi)
{
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
}

inline const char* palette(std::size_t i)
{
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return colors[i % 6];
}
}  // namespace detail

// Deterministic, self-contained SVG 1.1 line plot of a spectrum table.
inline std::string render_svg(const Table& t, const PlotStyle& style = {})
{
    if (t.rows() == 0 || t.columns.size() < 2) fail(ErrorCategory::invalid_argument, "cannot plot an empty spectrum");
    std::vector<std::size_t> cols;
    if (style.channels.empty()) {
        for (std::size_t j = 1; j < t.header.size(); ++j)
            if (t.header[j].rfind("sigma_", 0) != 0) cols.push_back(j);
    } else {
        for (const auto& c : style.channels) {
            const auto j = t.find(c);
            if (j <= 0) fail(ErrorCategory::invalid_argument, "no column '" + c + "' to plot");
            cols.push_back(static_cast<std::size_t>(j));
        }
    }
    if (cols.empty()) fail(ErrorCategory::invalid_argument, "no channels to plot");

    auto ty = [&](double v) { return style.y_db ? 10.0 * std::log10(v) : v; };
    auto usable_x = [&](double x) { return std::isfinite(x) && (!style.x_log || x > 0.0); };
    auto usable_y = [&](double y) { return std::isfinite(ty(y)) && (!style.y_log || y > 0.0); };

    const auto& xs = t.columns.front();
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!usable_x(xs[i])) continue;
        x0 = std::min(x0, xs[i]);
        x1 = std::max(x1, xs[i]);
        for (auto j : cols)
            if (usable_y(t.columns[j][i])) {
                y0 = std::min(y0, ty(t.columns[j][i]));
                y1 = std::max(y1, ty(t.columns[j][i]));
            }
    }
    if (style.reference && usable_y(*style.reference)) {
        y0 = std::min(y0, ty(*style.reference));
        y1 = std::max(y1, ty(*style.reference));
    }
    if (!(x1 >= x0) || !(y1 >= y0)) fail(ErrorCategory::invalid_argument, "spectrum has no plottable points");

    auto to_axis_x = [&](double x) { return style.x_log ? std::log10(x) : x; };
    auto to_axis_y = [&](double y) { return style.y_log ? std::log10(y) : y; };
    double ax0 = to_axis_x(x0), ax1 = to_axis_x(x1), ay0 = to_axis_y(y0), ay1 = to_axis_y(y1);
    if (ax1 == ax0) {
        ax0 -= 0.5;
        ax1 += 0.5;
    }
    if (ay1 == ay0) {
        const double pad = ay0 == 0.0 ? 1.0 : 0.1 * std::abs(ay0);
        ay0 -= pad;
        ay1 += pad;
    } else {
        const double pad = 0.05 * (ay1 - ay0);
        ay0 -= pad;
        ay1 += pad;
    }

    const double left = 80, right = 20, top = style.title.empty() ? 20 : 40, bottom = 50;
    const double pw = style.width - left - right, ph = style.height - top - bottom;
    auto px = [&](double x) { return left + (to_axis_x(x) - ax0) / (ax1 - ax0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (to_axis_y(y) - ay0) / (ay1 - ay0)) * ph; };

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(style.width) +
         "\" height=\"" + std::to_string(style.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!style.title.empty())
        s += "<text x=\"" + detail::fmt(left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
             detail::escape(style.title) + "</text>\n";
    s += "<rect x=\"" + detail::fmt(left) + "\" y=\"" + detail::fmt(top) + "\" width=\"" + detail::fmt(pw) +
         "\" height=\"" + detail::fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

    // Ticks: decades on log axes, 1-2-5 steps otherwise.
    auto ticks = [](double lo, double hi, bool log) {
        if (!log) return detail::linear_ticks(lo, hi);
        std::vector<double> out;
        for (double d = std::ceil(lo); d <= std::floor(hi); d += 1.0) out.push_back(d);
        if (out.empty()) out = detail::linear_ticks(lo, hi);
        return out;
    };
    for (double a : ticks(ax0, ax1, style.x_log)) {
        const double x = left + (a - ax0) / (ax1 - ax0) * pw;
        const double v = style.x_log ? std::pow(10.0, a) : a;
        s += "<line x1=\"" + detail::fmt(x) + "\" y1=\"" + detail::fmt(top + ph) + "\" x2=\"" + detail::fmt(x) +
             "\" y2=\"" + detail::fmt(top + ph + 5) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + detail::fmt(x) + "\" y=\"" + detail::fmt(top + ph + 18) + "\" text-anchor=\"middle\">" +
             detail::label_number(v) + "</text>\n";
    }
    for (double a : ticks(ay0, ay1, style.y_log)) {
        const double y = top + (1.0 - (a - ay0) / (ay1 - ay0)) * ph;
        const double v = style.y_log ? std::pow(10.0, a) : a;
        s += "<line x1=\"" + detail::fmt(left - 5) + "\" y1=\"" + detail::fmt(y) + "\" x2=\"" + detail::fmt(left) +
             "\" y2=\"" + detail::fmt(y) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + detail::fmt(left - 8) + "\" y=\"" + detail::fmt(y + 4) + "\" text-anchor=\"end\">" +
             detail::label_number(v) + "</text>\n";
    }
    s += "<text x=\"" + detail::fmt(left + pw / 2) + "\" y=\"" + detail::fmt(style.height - 10.0) +
         "\" text-anchor=\"middle\">" + detail::escape(t.header.front()) + "</text>\n";
    if (style.y_db)
        s += "<text x=\"16\" y=\"" + detail::fmt(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
             detail::fmt(top + ph / 2) + ")\">dB</text>\n";

    if (style.reference && usable_y(*style.reference)) {
        const double y = py(ty(*style.reference));
        s += "<line x1=\"" + detail::fmt(left) + "\" y1=\"" + detail::fmt(y) + "\" x2=\"" + detail::fmt(left + pw) +
             "\" y2=\"" + detail::fmt(y) + "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
    }
    for (std::size_t k = 0; k < cols.size(); ++k) {
        const auto& ys = t.columns[cols[k]];
        std::string pts;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!usable_x(xs[i]) || !usable_y(ys[i])) continue;
            if (!pts.empty()) pts += ' ';
            pts += detail::fmt(px(xs[i])) + "," + detail::fmt(py(ty(ys[i])));
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(detail::palette(k)) + "\" stroke-width=\"1.5\" points=\"" +
             pts + "\"/>\n";
        const double ly = top + 16.0 * (k + 1);
        s += "<line x1=\"" + detail::fmt(left + pw - 140) + "\" y1=\"" + detail::fmt(ly - 4) + "\" x2=\"" +
             detail::fmt(left + pw - 115) + "\" y2=\"" + detail::fmt(ly - 4) + "\" stroke=\"" + detail::palette(k) +
             "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + detail::fmt(left + pw - 110) + "\" y=\"" + detail::fmt(ly) + "\">" +
             detail::escape(t.header[cols[k]]) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace cavfb::io

#endif  // CAVFB_IO_SVG_PLOT_HPP
