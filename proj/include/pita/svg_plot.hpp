#pragma once

#include <string>
#include <utility>
#include <vector>

namespace pita {

/// One labeled box of samples.
struct BoxSeries {
    std::string label;
    std::vector<double> samples;
};

/// Writes a standalone SVG boxplot: one box per series with median line and
/// whiskers at the last samples inside 1.5 IQR. Output bytes are a pure
/// function of the inputs.
void write_boxplot_svg(const std::string& path, const std::string& title,
                       const std::string& y_label, const std::vector<BoxSeries>& series);

}  // namespace pita
