#include "svg.hpp"

#include "mvindex/numfmt.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mvindex::app {

namespace {

constexpr double width = 760.0;
constexpr double height = 520.0;
constexpr double left = 80.0;
constexpr double right = 190.0;  // legend column
constexpr double top = 40.0;
constexpr double bottom = 60.0;

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
        if (hi - lo < 1e-12) {
            const double pad = std::max(std::abs(lo) * 0.1, 1e-3);
            lo -= pad;
            hi += pad;
        }
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

double nice_step(double span) {
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0}) {
        if (raw <= m * mag) return m * mag;
    }
    return 10.0 * mag;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const std::string& title, const std::vector<PlotSeries>& series) {
    Range xr, yr;
    xr.add(0.0);
    const bool any_axes = std::any_of(series.begin(), series.end(), [](const PlotSeries& s) {
        return s.sets_axes && !s.points.empty();
    });
    for (const auto& s : series) {
        if (any_axes && !s.sets_axes) continue;
        for (const auto& p : s.points) {
            if (std::isfinite(p.stdev) && std::isfinite(p.ret)) {
                xr.add(p.stdev);
                yr.add(p.ret);
            }
        }
    }
    xr.finish();
    yr.finish();
    xr.lo = std::max(xr.lo, 0.0);

    const double pw = width - left - right;
    const double ph = height - top - bottom;
    auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return top + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };
    auto n = [](double v) { return format_number(v); };

    std::string out;
    out += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
        "font-family=\"sans-serif\" font-size=\"11\">\n",
        n(width), n(height), n(width), n(height));
    out += fmt::format("<title>{}</title>\n", escape(title));
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += fmt::format("<text x=\"{}\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
                       n(left + pw / 2), escape(title));

    // Axes and ticks.
    out += "<g class=\"axes\" stroke=\"#444\" fill=\"none\">\n";
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>\n", n(left), n(top), n(pw), n(ph));
    out += "</g>\n<g class=\"ticks\" fill=\"#222\">\n";
    const double xs = nice_step(xr.hi - xr.lo);
    for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi + 1e-12; t += xs) {
        const double v = std::abs(t) < xs * 1e-9 ? 0.0 : t;
        out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#444\"/>\n", n(px(v)),
                           n(top + ph), n(top + ph + 5));
        out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", n(px(v)), n(top + ph + 18),
                           n(v));
    }
    const double ys = nice_step(yr.hi - yr.lo);
    for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi + 1e-12; t += ys) {
        const double v = std::abs(t) < ys * 1e-9 ? 0.0 : t;
        out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#444\"/>\n", n(left - 5),
                           n(py(v)), n(left));
        out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", n(left - 8), n(py(v) + 4),
                           n(v));
    }
    out += "</g>\n";
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">Standard deviation</text>\n",
                       n(left + pw / 2), n(height - 15));
    out += fmt::format(
        "<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">Expected return</text>\n",
        n(top + ph / 2));

    // Data, clipped to the plot area.
    out += fmt::format("<clipPath id=\"plot\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath>\n",
                       n(left), n(top), n(pw), n(ph));
    out += "<g clip-path=\"url(#plot)\">\n";
    for (const auto& s : series) {
        if (s.kind == PlotSeries::Kind::line) {
            out += fmt::format("<polyline class=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"{} points=\"",
                               escape(s.css_class), s.color, s.dashed ? " stroke-dasharray=\"6 4\"" : "");
            bool first = true;
            for (const auto& p : s.points) {
                if (!std::isfinite(p.stdev) || !std::isfinite(p.ret)) continue;
                if (!first) out += ' ';
                out += n(px(p.stdev)) + "," + n(py(p.ret));
                first = false;
            }
            out += fmt::format("\"><title>{}</title></polyline>\n", escape(s.label));
        } else {
            out += fmt::format("<g class=\"{}\" fill=\"{}\" fill-opacity=\"0.45\"><title>{}</title>\n",
                               escape(s.css_class), s.color, escape(s.label));
            const double r = s.css_class == "portfolio" ? 4.5 : 1.6;
            for (const auto& p : s.points) {
                if (!std::isfinite(p.stdev) || !std::isfinite(p.ret)) continue;
                out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\"/>\n", n(px(p.stdev)), n(py(p.ret)), n(r));
            }
            out += "</g>\n";
        }
    }
    out += "</g>\n";

    // Legend.
    out += "<g class=\"legend\">\n";
    double ly = top + 10;
    for (const auto& s : series) {
        const double lx = width - right + 15;
        if (s.kind == PlotSeries::Kind::line) {
            out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"{4}/>\n",
                               n(lx), n(ly), n(lx + 22), s.color, s.dashed ? " stroke-dasharray=\"6 4\"" : "");
        } else {
            out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>\n", n(lx + 11), n(ly), s.color);
        }
        out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", n(lx + 30), n(ly + 4), escape(s.label));
        ly += 18;
    }
    out += "</g>\n</svg>\n";
    return out;
}

}  // namespace mvindex::app
