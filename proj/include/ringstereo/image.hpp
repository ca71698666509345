#pragma once

#include <filesystem>
#include <vector>

#include "ringstereo/common.hpp"

namespace ringstereo {

// Row-major single-channel image of doubles. Radiometric images use relative units
// where 0..1 spans the full 16-bit range.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> px;

    Image() = default;
    Image(int w, int h, double fill = 0.0) : width(w), height(h), px(static_cast<size_t>(w) * h, fill) {}

    double& at(int x, int y) { return px[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return px[static_cast<size_t>(y) * width + x]; }
    bool empty() const { return px.empty(); }
    double mean() const;
    bool operator==(const Image&) const = default;
};

// Coordinates are pixel centers: sample (x, y) sits at integer position (x, y).
// Both samplers clamp to the border.
double sample_bilinear(const Image& img, double x, double y);
double sample_catmull_rom(const Image& img, double x, double y);

// Separable Gaussian filter with periodic boundary.
Image gaussian_blur_wrap(const Image& img, double sigma);
// Same with the border clamped.
Image gaussian_blur_clamp(const Image& img, double sigma);

// Box-average down-scaling by an integer factor (trailing partial blocks dropped).
Image downscale(const Image& img, int factor);

// x minus its 3x3 box mean, border clamped.
Image highpass3(const Image& img);

// 16-bit binary PGM, big-endian samples, maxval 65535. Values are scaled by 65535 and clamped.
void write_pgm16(const std::filesystem::path& path, const Image& img);
Image read_pgm16(const std::filesystem::path& path);

// Grayscale PFM, little-endian (negative scale field), rows stored bottom to top as the format requires.
void write_pfm(const std::filesystem::path& path, const Image& img);
Image read_pfm(const std::filesystem::path& path);

}  // namespace ringstereo
