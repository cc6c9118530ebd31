#pragma once

#include <fmt/format.h>

#include <cmath>
#include <string>

namespace mvindex {

/// Text form used for every emitted number: 12 significant digits, so that
/// output is stable across runs and never coarser than the 9 digits carried
/// by published tables. Non-finite values print as `nan` / `inf` / `-inf`.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds -0
    return fmt::format("{:.12g}", v);
}

}  // namespace mvindex
