#pragma once

#include <array>
#include <vector>

#include "ringstereo/fft16.hpp"
#include "ringstereo/geometry.hpp"
#include "ringstereo/tile_fd.hpp"

namespace ringstereo {

constexpr double kDefaultFatZero = 0.05;

struct CrossSpectrum {
    Spectrum cells{};
    double weight = 1.0;  // number of contributing scenes once accumulated
};

// Pixel-domain correlation surface. Zero displacement sits at sample (8, 8); a peak at
// (8 + x, 8 + y) means the second tile is the first one moved by (x, y).
struct CorrTile {
    RealGrid v{};
    int pair = -1;  // index into PairTable::pairs, -1 for a consolidated surface

    double at(int col, int row) const { return v[row * kTile + col]; }
};

CrossSpectrum cross_spectrum(const FdTile& a, const FdTile& b);
void cross_spectrum_into(const Spectrum& a, const Spectrum& b, Spectrum& out);

// cell / (|cell| + fz * S), S = mean cell magnitude. Zero cells map to zero.
Spectrum phase_normalize(const Spectrum& cs, double fz);
Spectrum phase_normalize(const CrossSpectrum& cs, double fz);

// Inverse transform of an already normalized cross-spectrum, centred.
CorrTile correlation_from_normalized(const Spectrum& normalized, int pair = -1);
// Two surfaces from one inverse transform; same values as two correlation_from_normalized calls
// up to rounding. Pair ids are left to the caller.
void correlations_from_normalized(const Spectrum& a, const Spectrum& b, CorrTile& ca, CorrTile& cb);
CorrTile pair_correlation(const FdTile& a, const FdTile& b, double fz, int pair = -1);

// Precomputed bilinear resampling that maps every pair surface into the common frame:
// output sample xi reads input at 8 + scale * R(phi) xi, phi the baseline direction. The peak of
// the consolidated surface lies at x = 2 * residual disparity.
class Consolidator {
public:
    Consolidator() = default;
    explicit Consolidator(const PairTable& table);

    size_t pair_count() const { return maps_.size(); }
    // Averages the surfaces in ascending pair order. surfaces[k] belongs to table.pairs[k].
    CorrTile combine(const std::vector<CorrTile>& surfaces) const;
    // Same, for surfaces passed by pointer (avoids a copy in the tile loop).
    CorrTile combine(const CorrTile* const* surfaces, size_t n) const;
    // Sum of squared interpolation weights per output sample, for noise predictions.
    RealGrid weight_energy() const;

private:
    struct Tap {
        std::array<uint16_t, 4> idx{};
        std::array<double, 4> w{};
    };
    std::vector<std::array<Tap, kTileCells>> maps_;
};

// Full-diameter baseline length: consolidated peak x divided by this gives residual disparity.
constexpr double kReferenceBaseline = 2.0;

CorrTile consolidate(const std::vector<CorrTile>& corrs, const PairTable& table);

enum class ComKernel { Hard, Epanechnikov };

struct ComOptions {
    double radius = 4.0;
    // Each pass recentres the window on the previous centroid.
    int iterations = 5;
    ComKernel kernel = ComKernel::Epanechnikov;
};

struct Peak {
    double dx = 0.0;
    double dy = 0.0;
    double strength = 0.0;
    bool ok = false;
};

Peak argmax_com(const CorrTile& corr, const ComOptions& opts = {});

struct LmaOptions {
    int max_iterations = 20;
    double rel_tolerance = 1e-6;
    double sample_radius = 3.0;
    double max_excursion = 2.0;  // |d - init| beyond this counts as divergence
};

struct LmaResult {
    double d = 0.0;
    double dy = 0.0;
    double strength = 0.0;
    std::array<double, 4> covariance{};  // (d, dy) block, row-major
    std::array<double, 3> ellipse{};     // m11, m12, m22
    int iterations = 0;
    bool ok = false;
};

// Joint fit over all pair surfaces: pair p is A_p exp(-(xi - mu_p)^T M (xi - mu_p) / 2) + C_p with
// mu_p = d * b_p + dy * perp(b_p), one ellipse M shared by all pairs. corrs[k] belongs to
// table.pairs[k]; init_d is in the same residual-disparity units as d.
LmaResult argmax_lma(const std::vector<CorrTile>& corrs, const PairTable& table, double init_d,
                     const LmaOptions& opts = {});

}  // namespace ringstereo
