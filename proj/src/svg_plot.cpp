#include "pita/svg_plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "pita/errors.hpp"

namespace pita {

namespace {

struct BoxStats {
    double q1, median, q3, lo_whisker, hi_whisker;
};

BoxStats box_stats(std::vector<double> samples) {
    if (samples.empty()) throw std::invalid_argument("boxplot series has no samples");
    std::sort(samples.begin(), samples.end());
    auto quantile = [&](double q) {
        double pos = q * static_cast<double>(samples.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, samples.size() - 1);
        double frac = pos - static_cast<double>(lo);
        return samples[lo] * (1.0 - frac) + samples[hi] * frac;
    };
    BoxStats s{quantile(0.25), quantile(0.5), quantile(0.75), 0.0, 0.0};
    double iqr = s.q3 - s.q1;
    double lo_fence = s.q1 - 1.5 * iqr;
    double hi_fence = s.q3 + 1.5 * iqr;
    s.lo_whisker = samples.front();
    for (double v : samples) {
        if (v >= lo_fence) {
            s.lo_whisker = v;
            break;
        }
    }
    s.hi_whisker = samples.back();
    for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
        if (*it <= hi_fence) {
            s.hi_whisker = *it;
            break;
        }
    }
    return s;
}

std::string num(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 3);
    if (ec != std::errc()) return "0";
    return std::string(buf, ptr);
}

std::string tick_label(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 4);
    if (ec != std::errc()) return "0";
    return std::string(buf, ptr);
}

}  // namespace

void write_boxplot_svg(const std::string& path, const std::string& title,
                       const std::string& y_label, const std::vector<BoxSeries>& series) {
    if (series.empty()) throw std::invalid_argument("boxplot needs at least one series");
    std::vector<BoxStats> stats;
    stats.reserve(series.size());
    double lo = 0.0, hi = 1.0;
    bool first = true;
    for (const BoxSeries& s : series) {
        stats.push_back(box_stats(s.samples));
        double slo = stats.back().lo_whisker;
        double shi = stats.back().hi_whisker;
        if (first) {
            lo = slo;
            hi = shi;
            first = false;
        } else {
            lo = std::min(lo, slo);
            hi = std::max(hi, shi);
        }
    }
    if (hi <= lo) hi = lo + 1.0;
    double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const double width = 640.0, height = 420.0;
    const double left = 70.0, right = 20.0, top = 45.0, bottom = 55.0;
    double plot_w = width - left - right;
    double plot_h = height - top - bottom;
    double slot = plot_w / static_cast<double>(series.size());
    double box_w = std::min(60.0, slot * 0.5);

    auto y_of = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
        << num(height) << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << num(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    out << "<text x=\"16\" y=\"" << num(top + plot_h / 2) << "\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
        << num(top + plot_h / 2) << ")\">" << y_label << "</text>\n";

    // Axes and ticks.
    out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
        << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\""
        << num(left + plot_w) << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        double v = lo + (hi - lo) * static_cast<double>(i) / 5.0;
        double y = y_of(v);
        out << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left)
            << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << num(left - 8) << "\" y=\"" << num(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << tick_label(v) << "</text>\n";
    }

    for (std::size_t i = 0; i < series.size(); ++i) {
        const BoxStats& s = stats[i];
        double cx = left + slot * (static_cast<double>(i) + 0.5);
        double x0 = cx - box_w / 2.0, x1 = cx + box_w / 2.0;
        // Whiskers.
        out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y_of(s.lo_whisker)) << "\" x2=\""
            << num(cx) << "\" y2=\"" << num(y_of(s.q1)) << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y_of(s.q3)) << "\" x2=\"" << num(cx)
            << "\" y2=\"" << num(y_of(s.hi_whisker)) << "\" stroke=\"black\"/>\n";
        for (double w : {s.lo_whisker, s.hi_whisker}) {
            out << "<line x1=\"" << num(cx - box_w / 4) << "\" y1=\"" << num(y_of(w)) << "\" x2=\""
                << num(cx + box_w / 4) << "\" y2=\"" << num(y_of(w)) << "\" stroke=\"black\"/>\n";
        }
        // Box and median.
        out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y_of(s.q3)) << "\" width=\""
            << num(x1 - x0) << "\" height=\"" << num(y_of(s.q1) - y_of(s.q3))
            << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y_of(s.median)) << "\" x2=\""
            << num(x1) << "\" y2=\"" << num(y_of(s.median))
            << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << num(cx) << "\" y=\"" << num(top + plot_h + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << series[i].label << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace pita
