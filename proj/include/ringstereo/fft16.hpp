#pragma once

#include <array>
#include <complex>

namespace ringstereo {

constexpr int kTile = 16;
constexpr int kTileCells = kTile * kTile;
constexpr int kStride = 8;

using cplx = std::complex<double>;
// Row-major 16x16 grids; index = row * 16 + col. For spectra, col is the horizontal
// frequency u and row the vertical frequency v.
using Spectrum = std::array<cplx, kTileCells>;
using RealGrid = std::array<double, kTileCells>;

// Signed frequency index of DFT bin k: 0..7 then -8..-1.
constexpr int signed_freq(int k) { return k < kTile / 2 ? k : k - kTile; }

// Unnormalized forward transform: F(u,v) = sum f(x,y) exp(-2 pi i (u x + v y) / 16).
void fft16x16(Spectrum& data);
// Inverse including the 1/256 factor.
void ifft16x16(Spectrum& data);

Spectrum forward_real(const RealGrid& g);
// Real part of the inverse transform.
RealGrid inverse_real(const Spectrum& s);

}  // namespace ringstereo
