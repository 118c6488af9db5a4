#include "posevid/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace posevid {

namespace {

// 3x5 glyphs for numeric tick labels: 0-9 . - e +
const char* glyph_rows(char c) {
    switch (c) {
        case '0': return "111101101101111";
        case '1': return "010110010010111";
        case '2': return "111001111100111";
        case '3': return "111001111001111";
        case '4': return "101101111001001";
        case '5': return "111100111001111";
        case '6': return "111100111101111";
        case '7': return "111001010010010";
        case '8': return "111101111101111";
        case '9': return "111101111001111";
        case '.': return "000000000000010";
        case '-': return "000000111000000";
        case '+': return "000010111010000";
        case 'e': return "000111111100111";
        default: return "000000000000000";
    }
}

void draw_text(ImageU8& img, int x, int y, const std::string& text, Color c) {
    for (size_t i = 0; i < text.size(); ++i) {
        const char* rows = glyph_rows(text[i]);
        for (int ry = 0; ry < 5; ++ry) {
            for (int rx = 0; rx < 3; ++rx) {
                if (rows[ry * 3 + rx] != '1') continue;
                const int px = x + int(i) * 4 + rx;
                const int py = y + ry;
                if (px >= 0 && px < img.width && py >= 0 && py < img.height) {
                    uint8_t* p = img.px(py, px);
                    p[0] = c.r;
                    p[1] = c.g;
                    p[2] = c.b;
                }
            }
        }
    }
}

std::string tick_label(double v) {
    char buf[32];
    if (v == 0.0) return "0";
    const double av = std::abs(v);
    if (av >= 0.01 && av < 10000.0) {
        std::snprintf(buf, sizeof(buf), "%.3g", v);
    } else {
        std::snprintf(buf, sizeof(buf), "%.1e", v);
    }
    return buf;
}

}  // namespace

void write_line_plot(const std::string& path, const std::vector<PlotSeries>& series, int width,
                     int height) {
    ImageU8 img(height, width);
    for (auto& v : img.data) v = 250;  // near-white background

    const int ml = 48, mr = 12, mt = 12, mb = 24;  // margins
    const int x0 = ml, x1 = width - mr, y0 = mt, y1 = height - mb;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        for (double v : s.x) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : s.y) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
    }
    if (ymin > ymax) {
        ymin = 0;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    auto map_x = [&](double v) { return x0 + (v - xmin) / (xmax - xmin) * (x1 - x0); };
    auto map_y = [&](double v) { return y1 - (v - ymin) / (ymax - ymin) * (y1 - y0); };

    const Color axis{60, 60, 60};
    const Color grid{220, 220, 220};
    for (int i = 0; i <= 4; ++i) {
        const double fy = ymin + (ymax - ymin) * i / 4.0;
        const int py = int(std::lround(map_y(fy)));
        for (int px = x0; px <= x1; ++px) {
            uint8_t* p = img.px(py, px);
            p[0] = grid.r;
            p[1] = grid.g;
            p[2] = grid.b;
        }
        draw_text(img, 2, py - 2, tick_label(fy), axis);
    }
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        const int px = int(std::lround(map_x(fx)));
        draw_text(img, px - 6, y1 + 6, tick_label(fx), axis);
    }
    draw_capsule(img, x0, y1, x1, y1, 0.6, axis, axis);
    draw_capsule(img, x0, y0, x0, y1, 0.6, axis, axis);

    for (const auto& s : series) {
        for (size_t i = 1; i < s.x.size(); ++i) {
            draw_capsule(img, map_x(s.x[i - 1]), map_y(s.y[i - 1]), map_x(s.x[i]),
                         map_y(s.y[i]), 0.8, s.color, s.color);
        }
    }
    write_png(path, img);
}

}  // namespace posevid
