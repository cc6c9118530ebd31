#pragma once

#include "mvindex/frontier.hpp"

#include <string>
#include <vector>

namespace mvindex::app {

struct PlotSeries {
    enum class Kind { line, scatter };
    std::string label;
    std::string css_class;  // e.g. "frontier", "cal", "cloud", "portfolio"
    std::string color;
    Kind kind = Kind::line;
    bool dashed = false;
    /// When false the series is drawn but does not widen the axes.
    bool sets_axes = true;
    std::vector<RiskReturn> points;
};

/// Self-contained SVG with axes, ticks and a legend. Output depends only on
/// the arguments.
std::string render_svg(const std::string& title, const std::vector<PlotSeries>& series);

}  // namespace mvindex::app
