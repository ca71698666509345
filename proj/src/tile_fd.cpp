#include "ringstereo/tile_fd.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ringstereo/geometry.hpp"

namespace ringstereo {

bool tile_in_bounds(const Image& img, IVec2 c) {
    return c.x - 8 >= 0 && c.y - 8 >= 0 && c.x + 8 <= img.width && c.y + 8 <= img.height;
}

Tile extract_tile(const Image& img, IVec2 center, IVec2 integer_shift, int sensor) {
    const IVec2 c{center.x + integer_shift.x, center.y + integer_shift.y};
    if (!tile_in_bounds(img, c)) throw TileOutOfBounds();
    Tile t;
    t.center = c;
    t.sensor = sensor;
    for (int r = 0; r < kTile; ++r) {
        const double* src = &img.px[static_cast<size_t>(c.y - 8 + r) * img.width + (c.x - 8)];
        std::copy(src, src + kTile, &t.samples[r * kTile]);
    }
    return t;
}

double window1(double n) { return std::sin(kPi * (n + 0.5) / kTile); }

FdTile to_fd(const Tile& t, const WindowOptions& opts) {
    std::array<double, kTile> wx{}, wy{};
    for (int n = 0; n < kTile; ++n) {
        wx[n] = window1(n - opts.offset.x);
        wy[n] = window1(n - opts.offset.y);
    }
    double mean = 0.0;
    if (opts.remove_mean) {
        double num = 0.0, den = 0.0;
        for (int r = 0; r < kTile; ++r)
            for (int c = 0; c < kTile; ++c) {
                const double w = wy[r] * wx[c];
                num += w * t.samples[r * kTile + c];
                den += w;
            }
        mean = num / den;
    }
    FdTile fd;
    fd.center = t.center;
    fd.sensor = t.sensor;
    for (int r = 0; r < kTile; ++r)
        for (int c = 0; c < kTile; ++c) fd.spectrum[r * kTile + c] = (t.samples[r * kTile + c] - mean) * wy[r] * wx[c];
    fft16x16(fd.spectrum);
    return fd;
}

RealGrid from_fd(const FdTile& fd) { return inverse_real(fd.spectrum); }

void fractional_shift_inplace(Spectrum& s, double dx, double dy) {
    std::array<cplx, kTile> px{}, py{};
    for (int k = 0; k < kTile; ++k) {
        const double f = signed_freq(k);
        px[k] = std::polar(1.0, -2.0 * kPi * f * dx / kTile);
        py[k] = std::polar(1.0, -2.0 * kPi * f * dy / kTile);
    }
    for (int v = 0; v < kTile; ++v)
        for (int u = 0; u < kTile; ++u) s[v * kTile + u] *= px[u] * py[v];
}

FdTile fractional_shift(const FdTile& fd, double dx, double dy) {
    constexpr double lim = 0.5 + 1e-9;
    if (!(std::abs(dx) <= lim && std::abs(dy) <= lim)) throw UsageError("fractional shift exceeds ±0.5");
    FdTile out = fd;
    fractional_shift_inplace(out.spectrum, dx, dy);
    return out;
}

const DeconvKernel* KernelSet::lookup(int sensor, Vec2 position) const {
    if (sensor < 0 || sensor >= n_sensors || grid_w <= 0 || grid_h <= 0) return nullptr;
    const double fx = image_width > 0 ? position.x / image_width : 0.0;
    const double fy = image_height > 0 ? position.y / image_height : 0.0;
    const int gx = std::clamp(static_cast<int>(std::floor(fx * grid_w)), 0, grid_w - 1);
    const int gy = std::clamp(static_cast<int>(std::floor(fy * grid_h)), 0, grid_h - 1);
    const size_t idx = (static_cast<size_t>(sensor) * grid_h + gy) * grid_w + gx;
    return idx < kernels.size() ? &kernels[idx] : nullptr;
}

FdTile deconvolve(const FdTile& fd, const DeconvKernel* kernel) {
    FdTile out = fd;
    if (!kernel) {
        out.kernel_missing = true;
        return out;
    }
    for (int i = 0; i < kTileCells; ++i) out.spectrum[i] *= kernel->response[i];
    return out;
}

DeconvKernel make_inverse_kernel(const Spectrum& h, double floor) {
    double peak = 0.0;
    for (const auto& v : h) peak = std::max(peak, std::abs(v));
    const double lo = std::max(floor * peak, 1e-300);
    DeconvKernel k;
    for (int i = 0; i < kTileCells; ++i) {
        const double m = std::abs(h[i]);
        const double phase = m > 0 ? std::arg(h[i]) : 0.0;
        k.response[i] = std::polar(1.0 / std::max(m, lo), -phase);
    }
    return k;
}

Spectrum gaussian_blur_response(double sigma) {
    RealGrid g{};
    double sum = 0.0;
    for (int r = 0; r < kTile; ++r)
        for (int c = 0; c < kTile; ++c) {
            const double x = signed_freq(c), y = signed_freq(r);
            const double v = sigma > 0 ? std::exp(-0.5 * (x * x + y * y) / (sigma * sigma)) : (r == 0 && c == 0);
            g[r * kTile + c] = v;
            sum += v;
        }
    for (auto& v : g) v /= sum;
    return forward_real(g);
}

DeconvKernel identity_kernel() {
    DeconvKernel k;
    k.response.fill(cplx(1.0, 0.0));
    return k;
}

void save_kernels(const std::filesystem::path& path, const KernelSet& ks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "ringstereo-kernels 1\n";
    out << "sensors " << ks.n_sensors << "\n";
    out << "grid " << ks.grid_w << " " << ks.grid_h << "\n";
    out << "image " << ks.image_width << " " << ks.image_height << "\n";
    out.precision(17);
    out << "floor " << ks.floor << "\n";
    out << "end\n";
    for (const auto& k : ks.kernels)
        for (const auto& v : k.response)
            for (double part : {v.real(), v.imag()}) {
                const uint32_t bits = std::bit_cast<uint32_t>(static_cast<float>(part));
                const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                            static_cast<unsigned char>(bits >> 16),
                                            static_cast<unsigned char>(bits >> 24)};
                out.write(reinterpret_cast<const char*>(b), 4);
            }
}

KernelSet load_kernels(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "ringstereo-kernels 1") throw DataError("not a kernel container: " + path.string());
    KernelSet ks;
    while (std::getline(in, line) && line != "end") {
        std::istringstream s(line);
        std::string key;
        s >> key;
        if (key == "sensors") s >> ks.n_sensors;
        else if (key == "grid") s >> ks.grid_w >> ks.grid_h;
        else if (key == "image") s >> ks.image_width >> ks.image_height;
        else if (key == "floor") s >> ks.floor;
        else throw DataError("unknown kernel header key '" + key + "'");
    }
    if (line != "end" || ks.n_sensors <= 0 || ks.grid_w <= 0 || ks.grid_h <= 0)
        throw DataError("bad kernel header: " + path.string());
    ks.kernels.resize(static_cast<size_t>(ks.n_sensors) * ks.grid_w * ks.grid_h);
    for (auto& k : ks.kernels)
        for (auto& v : k.response) {
            double parts[2];
            for (double& p : parts) {
                unsigned char b[4];
                in.read(reinterpret_cast<char*>(b), 4);
                if (!in) throw DataError("truncated kernel container: " + path.string());
                const uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
                p = std::bit_cast<float>(bits);
            }
            v = {parts[0], parts[1]};
        }
    return ks;
}

FdTile prepare_tile(const Image& img, IVec2 center, Vec2 shift, int sensor, const FrontEndOptions& opts) {
    const SplitShift s = split_shift(shift);
    const Tile t = extract_tile(img, center, s.integer, sensor);
    WindowOptions w;
    w.remove_mean = opts.remove_mean;
    if (opts.window_follows_content) w.offset = s.fraction;
    FdTile fd = to_fd(t, w);
    if (opts.kernels) {
        const Vec2 pos{static_cast<double>(t.center.x), static_cast<double>(t.center.y)};
        fd = deconvolve(fd, opts.kernels->lookup(sensor, pos));
    }
    fractional_shift_inplace(fd.spectrum, -s.fraction.x, -s.fraction.y);
    return fd;
}

}  // namespace ringstereo
