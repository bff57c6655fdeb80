// Minimal SVG plot writer for the CLI reports: polyline curves and quiver
// arrows over a data box. Presentation only; nothing parses these files back.
#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "flowguard/num_format.hpp"

namespace flowguard::svg {

struct Series {
    std::string label;
    std::string color = "#1f6fb2";
    std::vector<std::pair<double, double>> points;
};

struct Arrow {
    double x0, y0, x1, y1;
};

class Plot {
  public:
    Plot(std::string title, std::string xlabel, std::string ylabel)
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

    void add_series(Series s) { series_.push_back(std::move(s)); }
    void add_arrows(std::vector<Arrow> arrows) { arrows_ = std::move(arrows); }

    std::string render() const {
        double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
        auto grow = [&](double x, double y) {
            xlo = std::min(xlo, x);
            xhi = std::max(xhi, x);
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
        };
        for (const auto& s : series_)
            for (const auto& [x, y] : s.points) grow(x, y);
        for (const auto& a : arrows_) {
            grow(a.x0, a.y0);
            grow(a.x1, a.y1);
        }
        if (xlo > xhi) {
            xlo = ylo = 0.0;
            xhi = yhi = 1.0;
        }
        if (xhi == xlo) xhi = xlo + 1.0;
        if (yhi == ylo) yhi = ylo + 1.0;
        const double mx = 0.05 * (xhi - xlo), my = 0.05 * (yhi - ylo);
        xlo -= mx;
        xhi += mx;
        ylo -= my;
        yhi += my;

        const int W = 640, H = 480, L = 70, R = 20, T = 40, B = 50;
        auto px = [&](double x) { return L + (x - xlo) / (xhi - xlo) * (W - L - R); };
        auto py = [&](double y) { return H - B - (y - ylo) / (yhi - ylo) * (H - T - B); };
        auto fmt = [](double v) {
            std::ostringstream os;
            os.precision(4);
            os << v;
            return os.str();
        };

        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
            << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
        out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
        out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title_
            << "</text>\n";
        out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
            << H - T - B << "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (int i = 0; i <= 4; ++i) {
            const double xv = xlo + (xhi - xlo) * i / 4.0;
            const double yv = ylo + (yhi - ylo) * i / 4.0;
            out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18
                << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
            out << "<text x=\"" << L - 8 << "\" y=\"" << py(yv) + 4
                << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv) << "</text>\n";
        }
        out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">"
            << xlabel_ << "</text>\n";
        out << "<text x=\"18\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
            << H / 2 << ")\">" << ylabel_ << "</text>\n";

        int legend_y = T + 16;
        for (const auto& s : series_) {
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\" points=\"";
            for (const auto& [x, y] : s.points) out << px(x) << ',' << py(y) << ' ';
            out << "\"/>\n";
            if (!s.label.empty()) {
                out << "<line x1=\"" << W - R - 130 << "\" y1=\"" << legend_y << "\" x2=\"" << W - R - 105
                    << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
                out << "<text x=\"" << W - R - 100 << "\" y=\"" << legend_y + 4 << "\" font-size=\"12\">"
                    << s.label << "</text>\n";
            }
            legend_y += 16;
        }
        for (const auto& a : arrows_) {
            const double x0 = px(a.x0), y0 = py(a.y0), x1 = px(a.x1), y1 = py(a.y1);
            out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y1
                << "\" stroke=\"#b22222\" stroke-width=\"1.2\"/>\n";
            const double dx = x1 - x0, dy = y1 - y0;
            const double len = std::hypot(dx, dy);
            if (len > 1e-9) {
                const double ux = dx / len, uy = dy / len;
                out << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x1 - 5 * ux + 3 * uy
                    << "\" y2=\"" << y1 - 5 * uy - 3 * ux << "\" stroke=\"#b22222\" stroke-width=\"1.2\"/>\n";
                out << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x1 - 5 * ux - 3 * uy
                    << "\" y2=\"" << y1 - 5 * uy + 3 * ux << "\" stroke=\"#b22222\" stroke-width=\"1.2\"/>\n";
            }
        }
        out << "</svg>\n";
        return out.str();
    }

  private:
    std::string title_, xlabel_, ylabel_;
    std::vector<Series> series_;
    std::vector<Arrow> arrows_;
};

} // namespace flowguard::svg
