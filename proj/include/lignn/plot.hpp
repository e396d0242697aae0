#pragma once

#include <lignn/error.hpp>
#include <lignn/experiment.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

// Dependency-free SVG charts for experiment reports.
namespace lignn::plot {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

namespace detail {

inline constexpr std::array<const char*, 8> palette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                     "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double x0 = 70, y0 = 40, w = 460, h = 300;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;

    double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
    double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

inline void axes(std::ostream& os, const Frame& f, const std::string& title, const std::string& xl,
                 const std::string& yl) {
    os << fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>)", f.x0 + f.w / 2,
                      escape(title))
       << '\n';
    os << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333"/>)", f.x0, f.y0, f.w,
                      f.h)
       << '\n';
    for (int i = 0; i <= 5; ++i) {
        const double x = f.xmin + (f.xmax - f.xmin) * i / 5, y = f.ymin + (f.ymax - f.ymin) * i / 5;
        os << fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="middle" font-size="11">{:.3g}</text>)",
                          f.px(x), f.y0 + f.h + 15, x)
           << '\n';
        os << fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="end" font-size="11">{:.3g}</text>)",
                          f.x0 - 5, f.py(y) + 4, y)
           << '\n';
        os << fmt::format(R"(<line x1="{0:.1f}" y1="{1:.1f}" x2="{2:.1f}" y2="{1:.1f}" stroke="#ddd"/>)", f.x0,
                          f.py(y), f.x0 + f.w)
           << '\n';
    }
    os << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>)", f.x0 + f.w / 2,
                      f.y0 + f.h + 34, escape(xl))
       << '\n';
    os << fmt::format(R"svg(<text x="16" y="{0}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {0})">{1}</text>)svg",
                      f.y0 + f.h / 2, escape(yl))
       << '\n';
}

}  // namespace detail

inline void write_line_chart(std::ostream& os, const Chart& c) {
    detail::Frame f;
    bool any = false;
    for (const auto& s : c.series) {
        for (auto [x, y] : s.points) {
            if (!any) {
                f.xmin = f.xmax = x;
                f.ymin = f.ymax = y;
                any = true;
            }
            f.xmin = std::min(f.xmin, x);
            f.xmax = std::max(f.xmax, x);
            f.ymin = std::min(f.ymin, y);
            f.ymax = std::max(f.ymax, y);
        }
    }
    f.ymin = std::min(f.ymin, 0.0);
    if (f.xmax == f.xmin) f.xmax = f.xmin + 1;
    if (f.ymax == f.ymin) f.ymax = f.ymin + 1;
    os << R"(<svg xmlns="http://www.w3.org/2000/svg" width="680" height="390" font-family="sans-serif">)" << '\n';
    detail::axes(os, f, c.title, c.x_label, c.y_label);
    for (std::size_t i = 0; i < c.series.size(); ++i) {
        const auto& s = c.series[i];
        const char* color = detail::palette[i % detail::palette.size()];
        std::string pts;
        for (auto [x, y] : s.points) pts += fmt::format("{:.1f},{:.1f} ", f.px(x), f.py(y));
        os << fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>)", color, pts) << '\n';
        os << fmt::format(R"(<text x="{}" y="{}" font-size="12" fill="{}">{}</text>)", f.x0 + f.w + 10,
                          f.y0 + 14 + 16 * static_cast<double>(i), color, detail::escape(s.label))
           << '\n';
    }
    os << "</svg>\n";
}

struct Bar {
    std::string label;
    std::vector<double> stack;  // segment heights, bottom first
};

/// Stacked bars; `legend` names the stack segments.
inline void write_bar_chart(std::ostream& os, const std::string& title, const std::vector<std::string>& legend,
                            const std::vector<Bar>& bars) {
    detail::Frame f;
    f.xmin = 0;
    f.xmax = static_cast<double>(std::max<std::size_t>(1, bars.size()));
    f.ymax = 0;
    for (const auto& b : bars) {
        double t = 0;
        for (double v : b.stack) t += v;
        f.ymax = std::max(f.ymax, t);
    }
    if (f.ymax == 0) f.ymax = 1;
    os << R"(<svg xmlns="http://www.w3.org/2000/svg" width="680" height="390" font-family="sans-serif">)" << '\n';
    os << fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>)", f.x0 + f.w / 2,
                      detail::escape(title))
       << '\n';
    os << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333"/>)", f.x0, f.y0, f.w,
                      f.h)
       << '\n';
    for (int i = 0; i <= 5; ++i) {
        const double y = f.ymax * i / 5;
        os << fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="end" font-size="11">{:.3g}</text>)", f.x0 - 5,
                          f.py(y) + 4, y)
           << '\n';
    }
    const double slot = f.w / f.xmax;
    for (std::size_t i = 0; i < bars.size(); ++i) {
        double base = 0;
        const double x = f.x0 + slot * static_cast<double>(i) + slot * 0.15;
        for (std::size_t k = 0; k < bars[i].stack.size(); ++k) {
            const double v = bars[i].stack[k];
            os << fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="{}"/>)", x,
                              f.py(base + v), slot * 0.7, f.py(base) - f.py(base + v),
                              detail::palette[k % detail::palette.size()])
               << '\n';
            base += v;
        }
        os << fmt::format(R"svg(<text x="{:.1f}" y="{:.1f}" text-anchor="end" font-size="10" transform="rotate(-45 {:.1f} {:.1f})">{}</text>)svg",
                          x + slot * 0.35, f.y0 + f.h + 12, x + slot * 0.35, f.y0 + f.h + 12,
                          detail::escape(bars[i].label))
           << '\n';
    }
    for (std::size_t k = 0; k < legend.size(); ++k) {
        os << fmt::format(R"(<text x="{}" y="{}" font-size="12" fill="{}">{}</text>)", f.x0 + f.w + 10,
                          f.y0 + 14 + 16 * static_cast<double>(k), detail::palette[k % detail::palette.size()],
                          detail::escape(legend[k]))
           << '\n';
    }
    os << "</svg>\n";
}

enum class Metric { cycles, actual, activations };

/// Normalized metric against droprate, one series per variant.
inline Chart sweep_chart(const std::vector<CellRow>& rows, const std::string& standard, Metric m) {
    static const std::map<Metric, std::pair<const char*, const char*>> names{
        {Metric::cycles, {"Normalized cycles", "cycles / baseline"}},
        {Metric::actual, {"Normalized actual access", "bursts / baseline"}},
        {Metric::activations, {"Normalized row activations", "activations / baseline"}}};
    Chart c;
    c.title = std::string(names.at(m).first) + " (" + standard + ")";
    c.x_label = "droprate";
    c.y_label = names.at(m).second;
    std::map<std::string, Series> by_variant;
    std::vector<std::string> order;
    for (const auto& r : rows) {
        if (r.standard != standard || r.variant == "baseline") continue;
        if (!by_variant.contains(r.variant)) order.push_back(r.variant);
        auto& s = by_variant[r.variant];
        s.label = r.variant;
        const double y = m == Metric::cycles ? r.norm_cycles : m == Metric::actual ? r.norm_actual : r.norm_activations;
        s.points.emplace_back(r.alpha, y);
    }
    for (const auto& v : order) c.series.push_back(std::move(by_variant[v]));
    if (c.series.empty()) throw ConfigError("no rows for standard " + standard);
    return c;
}

/// Session-size histogram (log2 buckets) from sessions.csv rows of one cell.
inline std::vector<Bar> session_histogram(const CsvTable& sessions, const std::string& variant,
                                          const std::string& standard, double alpha) {
    const auto cv = sessions.column("variant"), cs = sessions.column("standard"), ca = sessions.column("alpha"),
               cz = sessions.column("session_size"), cn = sessions.column("sessions");
    std::map<unsigned, double> buckets;
    for (const auto& r : sessions.rows) {
        if (r[cv] != variant || r[cs] != standard || std::abs(std::stod(r[ca]) - alpha) > 1e-9) continue;
        const auto size = std::stoull(r[cz]);
        buckets[static_cast<unsigned>(std::bit_width(size)) - 1] += std::stod(r[cn]);
    }
    std::vector<Bar> bars;
    for (const auto& [b, n] : buckets) {
        const auto lo = 1ull << b, hi = (2ull << b) - 1;
        bars.push_back({lo == hi ? fmt::format("{}", lo) : fmt::format("{}-{}", lo, hi), {n}});
    }
    return bars;
}

/// Hit / new-session / merge breakdown per cell of one standard.
inline std::vector<Bar> breakdown_bars(const std::vector<CellRow>& rows, const std::string& standard) {
    std::vector<Bar> bars;
    for (const auto& r : rows) {
        if (r.standard != standard) continue;
        bars.push_back({fmt::format("{} {:.1f}", r.variant, r.alpha), {r.hit, r.new_session, r.merge}});
    }
    return bars;
}

}  // namespace lignn::plot
