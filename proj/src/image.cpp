#include "ringstereo/image.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ringstereo {

double Image::mean() const {
    if (px.empty()) return 0.0;
    double s = 0.0;
    for (double v : px) s += v;
    return s / static_cast<double>(px.size());
}

namespace {

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

std::array<double, 4> cr_weights(double f) {
    const double f2 = f * f, f3 = f2 * f;
    return {(-f3 + 2 * f2 - f) * 0.5, (3 * f3 - 5 * f2 + 2) * 0.5, (-3 * f3 + 4 * f2 + f) * 0.5,
            (f3 - f2) * 0.5};
}

}  // namespace

double sample_bilinear(const Image& img, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    const int xa = clampi(x0, 0, img.width - 1), xb = clampi(x0 + 1, 0, img.width - 1);
    const int ya = clampi(y0, 0, img.height - 1), yb = clampi(y0 + 1, 0, img.height - 1);
    const double top = img.at(xa, ya) * (1 - fx) + img.at(xb, ya) * fx;
    const double bot = img.at(xa, yb) * (1 - fx) + img.at(xb, yb) * fx;
    return top * (1 - fy) + bot * fy;
}

double sample_catmull_rom(const Image& img, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const auto wx = cr_weights(x - x0);
    const auto wy = cr_weights(y - y0);
    std::array<int, 4> xs{};
    for (int i = 0; i < 4; ++i) xs[i] = clampi(x0 - 1 + i, 0, img.width - 1);
    double out = 0.0;
    for (int j = 0; j < 4; ++j) {
        const int yy = clampi(y0 - 1 + j, 0, img.height - 1);
        const double* row = &img.px[static_cast<size_t>(yy) * img.width];
        double acc = 0.0;
        for (int i = 0; i < 4; ++i) acc += wx[i] * row[xs[i]];
        out += wy[j] * acc;
    }
    return out;
}

namespace {

Image gaussian_blur(const Image& img, double sigma, bool periodic) {
    if (sigma <= 0) return img;
    const int r = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double ks = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        ks += k[i + r];
    }
    for (double& v : k) v /= ks;
    const int w = img.width, h = img.height;
    auto wrap = [periodic](int v, int n) { return periodic ? ((v % n) + n) % n : clampi(v, 0, n - 1); };
    Image tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[i + r] * img.at(wrap(x + i, w), y);
            tmp.at(x, y) = s;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(x, wrap(y + i, h));
            out.at(x, y) = s;
        }
    return out;
}

}  // namespace

Image gaussian_blur_wrap(const Image& img, double sigma) { return gaussian_blur(img, sigma, true); }

Image gaussian_blur_clamp(const Image& img, double sigma) { return gaussian_blur(img, sigma, false); }

Image downscale(const Image& img, int factor) {
    if (factor <= 1) return img;
    const int w = img.width / factor, h = img.height / factor;
    Image out(w, h);
    const double norm = 1.0 / (factor * factor);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int j = 0; j < factor; ++j)
                for (int i = 0; i < factor; ++i) s += img.at(x * factor + i, y * factor + j);
            out.at(x, y) = s * norm;
        }
    return out;
}

Image highpass3(const Image& img) {
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double s = 0.0;
            for (int j = -1; j <= 1; ++j)
                for (int i = -1; i <= 1; ++i)
                    s += img.at(clampi(x + i, 0, img.width - 1), clampi(y + j, 0, img.height - 1));
            out.at(x, y) = img.at(x, y) - s / 9.0;
        }
    return out;
}

namespace {

std::string read_token(std::istream& in) {
    std::string tok;
    while (in) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    in >> tok;
    return tok;
}

}  // namespace

void write_pgm16(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n65535\n";
    std::vector<unsigned char> buf(img.px.size() * 2);
    for (size_t i = 0; i < img.px.size(); ++i) {
        const double v = std::clamp(std::round(img.px[i] * 65535.0), 0.0, 65535.0);
        const auto s = static_cast<uint16_t>(v);
        buf[2 * i] = static_cast<unsigned char>(s >> 8);
        buf[2 * i + 1] = static_cast<unsigned char>(s & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Image read_pgm16(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    if (read_token(in) != "P5") throw DataError("not a binary PGM: " + path.string());
    const int w = std::stoi(read_token(in));
    const int h = std::stoi(read_token(in));
    const int maxval = std::stoi(read_token(in));
    in.get();
    if (w <= 0 || h <= 0 || maxval != 65535) throw DataError("unsupported PGM layout: " + path.string());
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h * 2);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw DataError("truncated PGM: " + path.string());
    Image img(w, h);
    for (size_t i = 0; i < img.px.size(); ++i)
        img.px[i] = static_cast<double>((buf[2 * i] << 8) | buf[2 * i + 1]) / 65535.0;
    return img;
}

void write_pfm(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "Pf\n" << img.width << " " << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x) {
            const float f = static_cast<float>(img.at(x, y));
            uint32_t bits = std::bit_cast<uint32_t>(f);
            unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                  static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
            out.write(reinterpret_cast<const char*>(b), 4);
        }
}

Image read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    if (read_token(in) != "Pf") throw DataError("not a grayscale PFM: " + path.string());
    const int w = std::stoi(read_token(in));
    const int h = std::stoi(read_token(in));
    const double scale = std::stod(read_token(in));
    in.get();
    if (w <= 0 || h <= 0) throw DataError("bad PFM size: " + path.string());
    const bool little = scale < 0;
    Image img(w, h);
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x) {
            unsigned char b[4];
            in.read(reinterpret_cast<char*>(b), 4);
            if (!in) throw DataError("truncated PFM: " + path.string());
            uint32_t bits = little ? (b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24))
                                   : (b[3] | (b[2] << 8) | (b[1] << 16) | (uint32_t(b[0]) << 24));
            img.at(x, y) = std::bit_cast<float>(bits);
        }
    return img;
}

}  // namespace ringstereo
