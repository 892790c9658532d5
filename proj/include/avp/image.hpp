#pragma once

#include <cstddef>
#include <vector>

#include "avp/error.hpp"

namespace avp {

// Dense row-major image, channel-interleaved, linear values. Row 0 is the top.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;  // height * width * channels

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

    double& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }

    // Bilinear sample at continuous pixel coordinates (px, py), where the
    // center of pixel (i, j) is at (i + 0.5, j + 0.5). Edge-clamped.
    double sample_bilinear(double px, double py, int c) const;
};

inline double Image::sample_bilinear(double px, double py, int c) const {
    double gx = px - 0.5, gy = py - 0.5;
    if (gx < 0) gx = 0;
    if (gy < 0) gy = 0;
    if (gx > width - 1) gx = width - 1;
    if (gy > height - 1) gy = height - 1;
    int x0 = static_cast<int>(gx);
    int y0 = static_cast<int>(gy);
    if (x0 > width - 2) x0 = width > 1 ? width - 2 : 0;
    if (y0 > height - 2) y0 = height > 1 ? height - 2 : 0;
    int x1 = width > 1 ? x0 + 1 : x0;
    int y1 = height > 1 ? y0 + 1 : y0;
    double fx = gx - x0, fy = gy - y0;
    double v00 = at(x0, y0, c), v10 = at(x1, y0, c);
    double v01 = at(x0, y1, c), v11 = at(x1, y1, c);
    return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

}  // namespace avp
