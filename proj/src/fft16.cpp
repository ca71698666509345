#include "ringstereo/fft16.hpp"

#include <cmath>

namespace ringstereo {

namespace {

struct Twiddles {
    // W16^(n2 k1) for the 4x4 decomposition, index n2 * 4 + k1.
    std::array<double, 16> re{}, im{};
    Twiddles() {
        for (int n2 = 0; n2 < 4; ++n2)
            for (int k1 = 0; k1 < 4; ++k1) {
                const double a = -2.0 * 3.14159265358979323846 * n2 * k1 / kTile;
                re[n2 * 4 + k1] = std::cos(a);
                im[n2 * 4 + k1] = std::sin(a);
            }
    }
};

const Twiddles& tw() {
    static const Twiddles t;
    return t;
}

// 4-point DFT of (r[k*s], i[k*s]); the inverse uses +i as the quarter-turn.
template <bool Inverse>
inline void dft4(double* r, double* i, int s) {
    const double ar = r[0] + r[2 * s], ai = i[0] + i[2 * s];
    const double br = r[0] - r[2 * s], bi = i[0] - i[2 * s];
    const double cr = r[s] + r[3 * s], ci = i[s] + i[3 * s];
    // d = (x1 - x3) * (-i) forward, * (+i) inverse
    const double dr = Inverse ? -(i[s] - i[3 * s]) : (i[s] - i[3 * s]);
    const double di = Inverse ? (r[s] - r[3 * s]) : -(r[s] - r[3 * s]);
    r[0] = ar + cr;
    i[0] = ai + ci;
    r[2 * s] = ar - cr;
    i[2 * s] = ai - ci;
    r[s] = br + dr;
    i[s] = bi + di;
    r[3 * s] = br - dr;
    i[3 * s] = bi - di;
}

// 16-point transform as 4 x 4: inner DFTs over n1 (x[4 n1 + n2]), twiddles W16^(n2 k1), outer
// DFTs over n2; output bin k1 + 4 k2. Complex products are spelled out because std::complex
// multiplication goes through the NaN-aware library routine.
template <bool Inverse>
void fft16_line(double* re, double* im) {
    const Twiddles& t = tw();
    double yr[16], yi[16];  // y[n2 * 4 + k1]
    for (int n2 = 0; n2 < 4; ++n2) {
        for (int n1 = 0; n1 < 4; ++n1) {
            yr[n2 * 4 + n1] = re[4 * n1 + n2];
            yi[n2 * 4 + n1] = im[4 * n1 + n2];
        }
        dft4<Inverse>(&yr[n2 * 4], &yi[n2 * 4], 1);
    }
    for (int k = 5; k < 16; ++k) {
        if (k % 4 == 0) continue;
        const double wr = t.re[k], wi = Inverse ? -t.im[k] : t.im[k];
        const double a = yr[k], b = yi[k];
        yr[k] = a * wr - b * wi;
        yi[k] = a * wi + b * wr;
    }
    for (int k1 = 0; k1 < 4; ++k1) dft4<Inverse>(&yr[k1], &yi[k1], 4);
    for (int k1 = 0; k1 < 4; ++k1)
        for (int k2 = 0; k2 < 4; ++k2) {
            re[k1 + 4 * k2] = yr[k2 * 4 + k1];
            im[k1 + 4 * k2] = yi[k2 * 4 + k1];
        }
}

template <bool Inverse>
void transform(Spectrum& d) {
    // Split planes; rows are transformed, the planes transposed, rows again, transposed back.
    alignas(64) double re[kTileCells], im[kTileCells];
    for (int i = 0; i < kTileCells; ++i) {
        re[i] = d[i].real();
        im[i] = d[i].imag();
    }
    for (int r = 0; r < kTile; ++r) fft16_line<Inverse>(&re[r * kTile], &im[r * kTile]);
    alignas(64) double tr[kTileCells], ti[kTileCells];
    for (int r = 0; r < kTile; ++r)
        for (int c = 0; c < kTile; ++c) {
            tr[c * kTile + r] = re[r * kTile + c];
            ti[c * kTile + r] = im[r * kTile + c];
        }
    for (int r = 0; r < kTile; ++r) fft16_line<Inverse>(&tr[r * kTile], &ti[r * kTile]);
    for (int r = 0; r < kTile; ++r)
        for (int c = 0; c < kTile; ++c) d[c * kTile + r] = {tr[r * kTile + c], ti[r * kTile + c]};
}

}  // namespace

void fft16x16(Spectrum& data) { transform<false>(data); }

void ifft16x16(Spectrum& data) {
    transform<true>(data);
    constexpr double inv = 1.0 / kTileCells;
    for (auto& v : data) v *= inv;
}

Spectrum forward_real(const RealGrid& g) {
    Spectrum s;
    for (int i = 0; i < kTileCells; ++i) s[i] = g[i];
    fft16x16(s);
    return s;
}

RealGrid inverse_real(const Spectrum& s) {
    Spectrum t = s;
    ifft16x16(t);
    RealGrid g;
    for (int i = 0; i < kTileCells; ++i) g[i] = t[i].real();
    return g;
}

}  // namespace ringstereo
