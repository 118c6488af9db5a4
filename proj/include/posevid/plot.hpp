#ifndef POSEVID_PLOT_HPP
#define POSEVID_PLOT_HPP

#include <string>
#include <vector>

#include "posevid/image.hpp"
#include "posevid/render.hpp"

namespace posevid {

struct PlotSeries {
    std::vector<double> x;
    std::vector<double> y;
    Color color{60, 120, 220};
};

// Static line plot: axes, numeric tick labels (digits only), one polyline per
// series, written as PNG.
void write_line_plot(const std::string& path, const std::vector<PlotSeries>& series,
                     int width = 640, int height = 400);

}  // namespace posevid

#endif
