#include "hypstab/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypstab {

namespace {

// Fixed-point coordinate formatting keeps the bytes reproducible.
std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string rgb(int r, int g, int b) {
    char buf[10];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

std::string blend_from_white(int r, int g, int b, double t) {
    t = std::clamp(t, 0.0, 1.0);
    auto ch = [t](int c) {
        return static_cast<int>(std::lround(255.0 + (c - 255.0) * t));
    };
    return rgb(ch(r), ch(g), ch(b));
}

// Discrete palette for the unstable count: green for stable, warm colours
// deepening with the count.
std::string count_color(int n) {
    static const char* palette[] = {"#31a354", "#fdae6b", "#e6550d",
                                    "#a63603", "#7a2f02", "#54230b",
                                    "#331204"};
    return palette[std::clamp(n, 0, 6)];
}

std::string cell_color(const SweepCell& c, double rate_absmax) {
    if (c.marginal)
        return "#bdbdbd";
    if (!c.error.empty())
        return "#000000";
    if (c.n_unstable.has_value())
        return count_color(*c.n_unstable);
    if (c.rate.has_value()) {
        const double t =
            rate_absmax > 0.0 ? std::abs(*c.rate) / rate_absmax : 0.0;
        return *c.rate < 0.0 ? blend_from_white(33, 102, 172, t)
                             : blend_from_white(178, 24, 43, t);
    }
    return "#ffffff";
}

} // namespace

std::string render_heatmap_svg(const SweepResult& r) {
    const SweepSpec& spec = r.spec;
    const int kc = spec.k_count;
    const int lc = spec.L_count;
    if (kc < 1 || lc < 1 ||
        r.cells.size() != static_cast<std::size_t>(kc) * lc)
        throw std::invalid_argument("sweep result grid is inconsistent");

    const double left = 70.0, top = 24.0, right = 20.0, bottom = 52.0;
    const double plot_w = 560.0, plot_h = 420.0;
    const double width = left + plot_w + right;
    const double height = top + plot_h + bottom;
    const double cw = plot_w / kc;
    const double ch = plot_h / lc;

    // Grid nodes sit at tile centres; the same mapping places the curves.
    auto X = [&](double k) {
        if (kc < 2)
            return left + plot_w / 2.0;
        return left + cw / 2.0 +
               (k - spec.k_min) / (spec.k_max - spec.k_min) * (plot_w - cw);
    };
    auto Y = [&](double L) {
        if (lc < 2)
            return top + plot_h / 2.0;
        return top + plot_h - ch / 2.0 -
               (L - spec.L_min) / (spec.L_max - spec.L_min) * (plot_h - ch);
    };

    double rate_absmax = 0.0;
    for (const auto& c : r.cells)
        if (c.rate.has_value())
            rate_absmax = std::max(rate_absmax, std::abs(*c.rate));

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
           "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) +
           " " + num(height) + "\">\n";
    svg += "<title>stability sweep a=" + tick(spec.a) + " b=" + tick(spec.b) +
           " lambda=" + tick(spec.lambda) + "</title>\n";

    for (int ik = 0; ik < kc; ++ik) {
        for (int il = 0; il < lc; ++il) {
            const SweepCell& c = r.at(ik, il);
            const double x = left + ik * cw;
            const double y = top + plot_h - (il + 1) * ch;
            svg += "<rect class=\"cell\" x=\"" + num(x) + "\" y=\"" + num(y) +
                   "\" width=\"" + num(cw) + "\" height=\"" + num(ch) +
                   "\" fill=\"" + cell_color(c, rate_absmax) + "\"/>\n";
        }
    }

    // Marginal curves clipped to the node window, one polyline per
    // uninterrupted visible run.
    const int n_pts = 512;
    for (const auto& curve :
         marginal_curves(spec.a, spec.b, spec.lambda, spec.L_max)) {
        const double span = curve.k_max - curve.k_min;
        const double lo = std::max(
            spec.k_min,
            curve.closed_min ? curve.k_min : curve.k_min + 1e-12 * span);
        const double hi = std::min(
            spec.k_max,
            curve.closed_max ? curve.k_max : curve.k_max - 1e-12 * span);
        if (!(lo < hi))
            continue;
        std::vector<std::string> run;
        auto flush = [&]() {
            if (run.size() >= 2) {
                svg += "<polyline class=\"curve\" fill=\"none\" "
                       "stroke=\"#d62728\" stroke-width=\"1.5\" points=\"";
                for (std::size_t i = 0; i < run.size(); ++i) {
                    if (i)
                        svg += ' ';
                    svg += run[i];
                }
                svg += "\"/>\n";
            }
            run.clear();
        };
        for (int i = 0; i <= n_pts; ++i) {
            const double k = lo + (hi - lo) * i / n_pts;
            const double L = curve.eval(k);
            if (std::isfinite(L) && L >= spec.L_min && L <= spec.L_max)
                run.push_back(num(X(k)) + "," + num(Y(L)));
            else
                flush();
        }
        flush();
    }

    // Frame and labels.
    const double x0 = left, x1 = left + plot_w;
    const double y0 = top, y1 = top + plot_h;
    auto line = [&](double ax, double ay, double bx, double by) {
        svg += "<line x1=\"" + num(ax) + "\" y1=\"" + num(ay) + "\" x2=\"" +
               num(bx) + "\" y2=\"" + num(by) +
               "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    };
    line(x0, y1, x1, y1);
    line(x0, y0, x0, y1);
    line(x1, y0, x1, y1);
    line(x0, y0, x1, y0);

    auto text = [&](double x, double y, const std::string& s,
                    const std::string& anchor) {
        svg += "<text x=\"" + num(x) + "\" y=\"" + num(y) +
               "\" font-family=\"sans-serif\" font-size=\"13\" "
               "text-anchor=\"" +
               anchor + "\">" + s + "</text>\n";
    };
    text(X(spec.k_min), y1 + 18.0, tick(spec.k_min), "middle");
    text(X(spec.k_max), y1 + 18.0, tick(spec.k_max), "middle");
    text(x0 - 8.0, Y(spec.L_min) + 4.0, tick(spec.L_min), "end");
    text(x0 - 8.0, Y(spec.L_max) + 4.0, tick(spec.L_max), "end");
    text((x0 + x1) / 2.0, height - 14.0, "k", "middle");
    text(20.0, (y0 + y1) / 2.0, "L", "middle");

    svg += "</svg>\n";
    return svg;
}

void render_heatmap(const SweepResult& r, const std::string& path) {
    const std::string svg = render_heatmap_svg(r);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    out << svg;
    out.flush();
    if (!out.good())
        throw std::runtime_error("failed writing " + path);
}

} // namespace hypstab
