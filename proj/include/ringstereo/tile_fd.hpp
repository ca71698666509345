#pragma once

#include <filesystem>
#include <vector>

#include "ringstereo/common.hpp"
#include "ringstereo/fft16.hpp"
#include "ringstereo/image.hpp"

namespace ringstereo {

class TileOutOfBounds : public DataError {
public:
    TileOutOfBounds() : DataError("tile outside image") {}
};

struct Tile {
    RealGrid samples{};
    IVec2 center;  // effective center: sample (8, 8) of the tile
    int sensor = -1;
};

struct FdTile {
    Spectrum spectrum{};
    IVec2 center;
    int sensor = -1;
    bool kernel_missing = false;
};

// Copies rows cy-8..cy+7 and cols cx-8..cx+7 where (cx, cy) = center + integer_shift.
Tile extract_tile(const Image& img, IVec2 center, IVec2 integer_shift, int sensor = -1);
bool tile_in_bounds(const Image& img, IVec2 center);

// 1-D analysis window sin(pi (n + 0.5) / 16). Squared copies shifted by 8 sum to one.
double window1(double n);

struct WindowOptions {
    // The window is evaluated at n - offset so it stays centred on content that sits at
    // 8 + offset inside the tile.
    Vec2 offset{};
    // Subtract the window-weighted mean before windowing.
    bool remove_mean = false;
};

FdTile to_fd(const Tile& t, const WindowOptions& opts = {});
// Inverse transform: returns the windowed tile.
RealGrid from_fd(const FdTile& fd);

// Multiplies cell (u, v) by exp(-2 pi i (u' dx + v' dy) / 16), which moves content by (+dx, +dy).
FdTile fractional_shift(const FdTile& fd, double dx, double dy);
void fractional_shift_inplace(Spectrum& s, double dx, double dy);

struct DeconvKernel {
    Spectrum response{};
};

// Space-variant kernel grid: one kernel per (sensor, grid node), nearest-node lookup.
struct KernelSet {
    int n_sensors = 0;
    int grid_w = 0;
    int grid_h = 0;
    int image_width = 0;
    int image_height = 0;
    double floor = 1e-3;
    std::vector<DeconvKernel> kernels;  // sensor-major, then grid row-major

    const DeconvKernel* lookup(int sensor, Vec2 position) const;
};

// Cellwise multiply. A null kernel passes the tile through and sets kernel_missing.
FdTile deconvolve(const FdTile& fd, const DeconvKernel* kernel);

// Regularized inverse of a blur response: magnitude 1 / max(|H|, floor * max|H|), phase -arg H.
DeconvKernel make_inverse_kernel(const Spectrum& blur_response, double floor = 1e-3);
// Transfer function of a periodic Gaussian blur with the given sigma (pixels).
Spectrum gaussian_blur_response(double sigma);
DeconvKernel identity_kernel();

// Text header ("ringstereo-kernels 1", key/value lines, "end") followed by little-endian
// float32 (re, im) pairs in KernelSet order.
void save_kernels(const std::filesystem::path& path, const KernelSet& ks);
KernelSet load_kernels(const std::filesystem::path& path);

struct FrontEndOptions {
    bool window_follows_content = true;
    bool remove_mean = true;
    const KernelSet* kernels = nullptr;
};

// Full per-sensor tile front end: split the shift, extract at the integer part, window,
// transform, deconvolve if kernels are supplied, and move the content back by the fractional
// part so that it is centred on the tile. Throws TileOutOfBounds.
FdTile prepare_tile(const Image& img, IVec2 center, Vec2 shift, int sensor, const FrontEndOptions& opts);

}  // namespace ringstereo
