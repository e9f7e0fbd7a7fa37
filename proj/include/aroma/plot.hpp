#pragma once

#include "aroma/common.hpp"

#include <string>
#include <vector>

namespace aroma::plot {

void write_ppm(const std::string& path, int width, int height,
               const std::vector<unsigned char>& rgb);

/// Field heatmap (rows map to y, columns to x), viridis-style colors,
/// nearest-neighbor upscaled.
void heatmap(const std::string& path, const Mat& field, int upscale = 4);

/// Simple line plot of one or more series on shared axes.
void line_plot(const std::string& path, const std::vector<std::vector<double>>& series,
               int width = 900, int height = 540);

/// Reshape a flat per-point vector into an ny x nx grid (row-major points).
Mat to_grid(const Vec& values, int ny, int nx);

}  // namespace aroma::plot
