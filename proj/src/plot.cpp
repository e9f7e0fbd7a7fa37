#include "aroma/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace aroma::plot {

namespace {

struct Color {
    double r, g, b;
};

// coarse viridis control points
constexpr Color kMap[] = {{0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530},
                          {0.207, 0.372, 0.553}, {0.164, 0.471, 0.558}, {0.128, 0.567, 0.551},
                          {0.135, 0.659, 0.518}, {0.267, 0.749, 0.441}, {0.478, 0.821, 0.318},
                          {0.741, 0.873, 0.150}, {0.993, 0.906, 0.144}};

Color colormap(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const int bins = static_cast<int>(std::size(kMap)) - 1;
    const double x = t * bins;
    const int i = std::min(bins - 1, static_cast<int>(x));
    const double f = x - i;
    return {kMap[i].r + f * (kMap[i + 1].r - kMap[i].r),
            kMap[i].g + f * (kMap[i + 1].g - kMap[i].g),
            kMap[i].b + f * (kMap[i + 1].b - kMap[i].b)};
}

void put_pixel(std::vector<unsigned char>& rgb, int width, int x, int y, Color c) {
    const size_t idx = 3 * (static_cast<size_t>(y) * width + x);
    rgb[idx] = static_cast<unsigned char>(std::clamp(c.r, 0.0, 1.0) * 255.0);
    rgb[idx + 1] = static_cast<unsigned char>(std::clamp(c.g, 0.0, 1.0) * 255.0);
    rgb[idx + 2] = static_cast<unsigned char>(std::clamp(c.b, 0.0, 1.0) * 255.0);
}

}  // namespace

void write_ppm(const std::string& path, int width, int height,
               const std::vector<unsigned char>& rgb) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot open " + path);
    out << "P6\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

void heatmap(const std::string& path, const Mat& field, int upscale) {
    const int ny = static_cast<int>(field.rows());
    const int nx = static_cast<int>(field.cols());
    const double lo = field.minCoeff(), hi = field.maxCoeff();
    const double span = hi > lo ? hi - lo : 1.0;
    const int width = nx * upscale, height = ny * upscale;
    std::vector<unsigned char> rgb(static_cast<size_t>(width) * height * 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double v = (field(y / upscale, x / upscale) - lo) / span;
            put_pixel(rgb, width, x, y, colormap(v));
        }
    write_ppm(path, width, height, rgb);
}

void line_plot(const std::string& path, const std::vector<std::vector<double>>& series, int width,
               int height) {
    std::vector<unsigned char> rgb(static_cast<size_t>(width) * height * 3, 250);
    double lo = 0.0, hi = 1.0;
    size_t longest = 2;
    bool first = true;
    for (const auto& s : series)
        for (double v : s) {
            if (!std::isfinite(v)) continue;
            if (first) {
                lo = hi = v;
                first = false;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    for (const auto& s : series) longest = std::max(longest, s.size());
    if (hi <= lo) hi = lo + 1.0;

    const int margin = 40;
    const Color axis{0.25, 0.25, 0.25};
    for (int x = margin; x < width - margin / 2; ++x) put_pixel(rgb, width, x, height - margin, axis);
    for (int y = margin / 2; y < height - margin; ++y) put_pixel(rgb, width, margin, y, axis);

    const Color palette[] = {{0.122, 0.467, 0.706}, {1.0, 0.498, 0.055}, {0.173, 0.627, 0.173},
                             {0.839, 0.153, 0.157}, {0.580, 0.404, 0.741}};
    auto to_px = [&](size_t i, double v) {
        const double fx = static_cast<double>(i) / static_cast<double>(longest - 1);
        const double fy = (v - lo) / (hi - lo);
        const int x = margin + static_cast<int>(fx * (width - 1.5 * margin));
        const int y = height - margin - static_cast<int>(fy * (height - 1.5 * margin));
        return std::pair<int, int>{std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1)};
    };
    for (size_t s = 0; s < series.size(); ++s) {
        const Color c = palette[s % std::size(palette)];
        for (size_t i = 1; i < series[s].size(); ++i) {
            if (!std::isfinite(series[s][i - 1]) || !std::isfinite(series[s][i])) continue;
            auto [x0, y0] = to_px(i - 1, series[s][i - 1]);
            auto [x1, y1] = to_px(i, series[s][i]);
            const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
            for (int k = 0; k <= steps; ++k) {
                const double f = static_cast<double>(k) / steps;
                const int x = static_cast<int>(std::lround(x0 + f * (x1 - x0)));
                const int y = static_cast<int>(std::lround(y0 + f * (y1 - y0)));
                put_pixel(rgb, width, x, y, c);
                if (y + 1 < height) put_pixel(rgb, width, x, y + 1, c);
            }
        }
    }
    write_ppm(path, width, height, rgb);
}

Mat to_grid(const Vec& values, int ny, int nx) {
    if (values.size() != static_cast<Eigen::Index>(ny) * nx)
        throw Error("ShapeMismatch", "to_grid: size mismatch");
    Mat g(ny, nx);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) g(y, x) = values[static_cast<Eigen::Index>(y) * nx + x];
    return g;
}

}  // namespace aroma::plot
