#pragma once

// Raster line plots for ROC curves and ablation sweeps.

#include "maeanom/metrics.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace maeanom {

struct PlotSeries {
    std::vector<double> x;
    std::vector<double> y;
    std::string label;
    std::array<std::uint8_t, 3> rgb{31, 119, 180};
    bool markers = false;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    int width = 640;
    int height = 480;
    bool diagonal = false;                  // dashed y = x reference
    std::vector<std::string> x_tick_labels;  // categorical ticks at x = 0, 1, ...
    std::vector<PlotSeries> series;
};

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB
};

RgbImage render_plot(const PlotSpec& spec);

/// ROC curve with the chance diagonal; the legend carries the AUROC.
PlotSpec roc_plot(const RocResult& roc, const std::string& title);

/// AUROC against the swept values. Numeric values are placed on a linear
/// axis; otherwise the labels become categorical ticks.
PlotSpec ablation_plot(const std::string& axis, const std::vector<std::string>& values,
                       const std::vector<double>& aurocs);

void write_plot_png(const std::filesystem::path& path, const PlotSpec& spec);
std::vector<std::uint8_t> plot_png_bytes(const PlotSpec& spec);

}  // namespace maeanom
