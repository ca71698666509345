#include "doctest.h"
#include "ringstereo/phasecorr.hpp"
#include "ringstereo/rng.hpp"

using namespace ringstereo;

namespace {

Image texture(uint64_t seed, int size = 64) {
    Rng rng(seed);
    Image img(size, size);
    for (auto& v : img.px) v = rng.normal();
    return gaussian_blur_wrap(img, 1.0);
}

FdTile tile_at(const Image& img, IVec2 c) { return to_fd(extract_tile(img, c, {0, 0}), WindowOptions{{}, true}); }

int argmax(const CorrTile& c) {
    int b = 0;
    for (int i = 1; i < 256; ++i)
        if (c.v[i] > c.v[b]) b = i;
    return b;
}

CorrTile gaussian_surface(double px, double py, double sx, double sy, double amp = 1.0, double off = 0.0) {
    CorrTile c;
    for (int r = 0; r < 16; ++r)
        for (int col = 0; col < 16; ++col) {
            const double dx = col - px, dy = r - py;
            c.v[r * 16 + col] = amp * std::exp(-0.5 * (dx * dx / (sx * sx) + dy * dy / (sy * sy))) + off;
        }
    return c;
}

PairTable manual_table(std::vector<Vec2> baselines) {
    PairTable t;
    for (const Vec2& b : baselines) {
        PairInfo p;
        p.baseline = b;
        p.length = b.norm();
        p.rotation = -std::atan2(b.y, b.x);
        p.scale = p.length / 2.0;
        t.pairs.push_back(p);
    }
    return t;
}

}  // namespace

TEST_CASE("cross_spectrum") {
    const Image img = texture(1);
    const FdTile a = tile_at(img, {32, 32});
    const CrossSpectrum self = cross_spectrum(a, a);
    for (int i = 0; i < 256; ++i) {
        CHECK(std::abs(self.cells[i].imag()) < 1e-12 * (1 + std::abs(self.cells[i])));
        CHECK(self.cells[i].real() >= 0.0);
    }
    const FdTile b = fractional_shift(a, 0.3, 0.0);
    const CrossSpectrum cs = cross_spectrum(a, b);
    for (int u = 1; u < 8; ++u) {
        const cplx c = cs.cells[2 * 16 + u];
        CHECK(std::arg(c) == doctest::Approx(2 * kPi * 0.3 * u / 16).epsilon(1e-9));
    }
    // Hermitian symmetry for real input tiles.
    const CrossSpectrum ab = cross_spectrum(a, tile_at(img, {40, 36}));
    for (int v = 0; v < 16; ++v)
        for (int u = 0; u < 16; ++u)
            CHECK(std::abs(ab.cells[((16 - v) % 16) * 16 + (16 - u) % 16] - std::conj(ab.cells[v * 16 + u])) < 1e-9);
    FdTile zero;
    for (const auto& c : cross_spectrum(zero, a).cells) CHECK(std::abs(c) == 0.0);
}

TEST_CASE("phase_normalize") {
    const Image img = texture(2);
    const CrossSpectrum cs = cross_spectrum(tile_at(img, {32, 32}), tile_at(img, {33, 30}));
    for (const auto& c : phase_normalize(cs, 0.0)) CHECK(std::abs(c) == doctest::Approx(1.0).epsilon(1e-12));

    Spectrum with_zero = cs.cells;
    with_zero[17] = 0.0;
    CHECK(std::abs(phase_normalize(with_zero, 0.0)[17]) == 0.0);

    const Spectrum big = phase_normalize(cs, 1e9);
    const double k = big[1].real() / cs.cells[1].real();
    for (int i = 0; i < 256; ++i) CHECK(std::abs(big[i] - k * cs.cells[i]) < 1e-6 * std::abs(k * cs.cells[i]) + 1e-18);
    CHECK_THROWS_AS(phase_normalize(cs, -1.0), UsageError);
}

TEST_CASE("identical band-limited tiles give one dominant central peak") {
    const Image img = texture(3);
    const FdTile a = tile_at(img, {32, 32});
    const CorrTile c = pair_correlation(a, a, kDefaultFatZero);
    CHECK(argmax(c) == 8 * 16 + 8);
    double second = -1e9;
    for (int r = 1; r < 15; ++r)
        for (int col = 1; col < 15; ++col) {
            if (r == 8 && col == 8) continue;
            const double v = c.at(col, r);
            bool local = true;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc)
                    if ((dr || dc) && c.at(col + dc, r + dr) > v) local = false;
            if (local) second = std::max(second, v);
        }
    CHECK(c.at(8, 8) / second > 5.0);
}

TEST_CASE("pair_correlation peak positions") {
    const Image img = texture(4);
    const FdTile a = tile_at(img, {32, 32});
    // b holds the content of a moved one pixel to the right.
    const FdTile b = tile_at(img, {31, 32});
    CHECK(argmax(pair_correlation(a, b, kDefaultFatZero)) == 8 * 16 + 9);
    const FdTile down = tile_at(img, {32, 30});
    CHECK(argmax(pair_correlation(a, down, kDefaultFatZero)) == 10 * 16 + 8);

    const FdTile f = fractional_shift(a, 0.3, -0.2);
    const Peak p = argmax_com(pair_correlation(a, f, kDefaultFatZero));
    REQUIRE(p.ok);
    CHECK(std::abs(p.dx - 0.3) < 0.05);
    CHECK(std::abs(p.dy + 0.2) < 0.05);
}

TEST_CASE("pair_correlation of swapped inputs is the point reflection") {
    const Image img = texture(5);
    const FdTile a = tile_at(img, {30, 33}), b = tile_at(img, {32, 31});
    const CorrTile ab = pair_correlation(a, b, kDefaultFatZero), ba = pair_correlation(b, a, kDefaultFatZero);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) CHECK(std::abs(ab.at(c, r) - ba.at((16 - c) % 16, (16 - r) % 16)) < 1e-9);
}

TEST_CASE("two surfaces from one inverse transform match separate transforms") {
    const Image img = texture(6);
    const FdTile a = tile_at(img, {30, 33});
    // Fractional shifts leave the Nyquist bins non-Hermitian.
    const FdTile b = fractional_shift(tile_at(img, {32, 31}), 0.37, -0.21);
    const FdTile c = fractional_shift(tile_at(img, {33, 30}), -0.4, 0.15);
    const Spectrum n1 = phase_normalize(cross_spectrum(a, b), kDefaultFatZero);
    const Spectrum n2 = phase_normalize(cross_spectrum(c, a), kDefaultFatZero);
    CorrTile p1, p2;
    correlations_from_normalized(n1, n2, p1, p2);
    const CorrTile s1 = correlation_from_normalized(n1), s2 = correlation_from_normalized(n2);
    for (int i = 0; i < 256; ++i) {
        CHECK(std::abs(p1.v[i] - s1.v[i]) < 1e-12);
        CHECK(std::abs(p2.v[i] - s2.v[i]) < 1e-12);
    }
}

TEST_CASE("consolidation of a single +x full-diameter pair is the identity") {
    const PairTable t = manual_table({{2.0, 0.0}});
    CorrTile s = gaussian_surface(9.3, 7.6, 1.0, 1.4);
    s.pair = 0;
    const CorrTile out = consolidate({s}, t);
    for (int i = 0; i < 256; ++i) CHECK(out.v[i] == doctest::Approx(s.v[i]).epsilon(1e-14));
}

TEST_CASE("consolidation aligns mirrored pairs and averages their noise") {
    // Opposite baselines: the second surface's peak is mirrored; after alignment both peaks sit
    // at +x, and independent noise averages down by sqrt(2).
    const PairTable t = manual_table({{2.0, 0.0}, {-2.0, 0.0}});
    const Consolidator cons(t);
    Rng rng(11);
    const int trials = 4000;
    double s1 = 0, s1q = 0, s2 = 0, s2q = 0;
    for (int k = 0; k < trials; ++k) {
        CorrTile a = gaussian_surface(10, 8, 1.0, 1.0), b = gaussian_surface(6, 8, 1.0, 1.0);
        for (auto& v : a.v) v += 0.3 * rng.normal();
        for (auto& v : b.v) v += 0.3 * rng.normal();
        const CorrTile c = cons.combine(std::vector<CorrTile>{a, b});
        const double one = a.at(10, 8), both = c.at(10, 8);
        s1 += one;
        s1q += one * one;
        s2 += both;
        s2q += both * both;
    }
    auto snr = [&](double s, double sq) {
        const double m = s / trials;
        return m / std::sqrt(sq / trials - m * m);
    };
    const double ratio = snr(s2, s2q) / snr(s1, s1q);
    CHECK(ratio >= 1.3);
    CHECK(ratio <= 1.5);
}

TEST_CASE("consolidating 120 pure-noise surfaces reduces RMS as the weights predict") {
    const RigModel rig;
    const PairTable t = make_pair_table(rig, evenly_spaced_subset(rig, 16));
    const Consolidator cons(t);
    const RealGrid energy = cons.weight_energy();
    double predicted = 0;
    for (double e : energy) predicted += e / (120.0 * 120.0);
    predicted = std::sqrt(predicted / 256);
    Rng rng(12);
    double measured = 0;
    const int trials = 50;
    std::vector<CorrTile> s(120);
    for (int k = 0; k < trials; ++k) {
        for (auto& c : s)
            for (auto& v : c.v) v = rng.normal();
        const CorrTile out = cons.combine(s);
        for (double v : out.v) measured += v * v;
    }
    measured = std::sqrt(measured / (trials * 256.0));
    CHECK(measured == doctest::Approx(predicted).epsilon(0.2));
    // Bilinear smoothing makes the reduction larger than sqrt(120) alone.
    CHECK(measured < 1.0 / std::sqrt(120.0));
}

TEST_CASE("consolidation is linear") {
    const RigModel rig;
    const PairTable t = make_pair_table(rig, {0, 4, 8, 12});
    Rng rng(13);
    std::vector<CorrTile> s(t.pairs.size()), k(t.pairs.size());
    for (size_t p = 0; p < s.size(); ++p) {
        s[p].pair = k[p].pair = static_cast<int>(p);
        for (int i = 0; i < 256; ++i) {
            s[p].v[i] = rng.normal();
            k[p].v[i] = 3.5 * s[p].v[i];
        }
    }
    const CorrTile a = consolidate(s, t), b = consolidate(k, t);
    for (int i = 0; i < 256; ++i) CHECK(b.v[i] == doctest::Approx(3.5 * a.v[i]).epsilon(1e-12).scale(1e-12));
}

TEST_CASE("argmax_com") {
    CorrTile delta;
    delta.v[8 * 16 + 9] = 1.0;
    Peak p = argmax_com(delta);
    REQUIRE(p.ok);
    CHECK(p.dx == doctest::Approx(1.0));
    CHECK(p.dy == doctest::Approx(0.0));

    p = argmax_com(gaussian_surface(8.4, 8.0, 1.0, 1.0));
    REQUIRE(p.ok);
    CHECK(std::abs(p.dx - 0.4) < 0.1);
    CHECK(std::abs(p.dy) < 1e-12);

    ComOptions single;
    single.kernel = ComKernel::Hard;
    single.iterations = 1;
    p = argmax_com(gaussian_surface(8.4, 8.0, 1.0, 1.0), single);
    REQUIRE(p.ok);
    CHECK(std::abs(p.dx - 0.4) < 0.1);

    CorrTile flat;
    CHECK_FALSE(argmax_com(flat).ok);
    CorrTile neg;
    neg.v.fill(-1.0);
    CHECK_FALSE(argmax_com(neg).ok);
}

TEST_CASE("argmax_lma recovers a noiseless single-pair offset") {
    const RigModel rig;
    const PairTable t = make_pair_table(rig, {0, 8});
    const double d = 0.37;
    const Vec2 mu = t.pairs[0].baseline * d;
    CorrTile s = gaussian_surface(8 + mu.x, 8 + mu.y, 1.1, 0.9, 0.8, 0.02);
    s.pair = 0;
    const LmaResult r = argmax_lma({s}, t, 0.0);
    REQUIRE(r.ok);
    CHECK(std::abs(r.d - d) < 1e-3);
    CHECK(std::abs(r.dy) < 1e-3);

    CorrTile zero;
    zero.pair = 0;
    CHECK_FALSE(argmax_lma({zero}, t, 0.0).ok);
}

TEST_CASE("argmax_lma shares one disparity across many pairs") {
    const RigModel rig;
    const PairTable t = make_pair_table(rig, evenly_spaced_subset(rig, 8));
    const double d = -0.42;
    std::vector<CorrTile> s;
    for (size_t p = 0; p < t.pairs.size(); ++p) {
        const Vec2 mu = t.pairs[p].baseline * d;
        s.push_back(gaussian_surface(8 + mu.x, 8 + mu.y, 1.2, 1.2, 0.5 + 0.01 * p));
        s.back().pair = static_cast<int>(p);
    }
    const LmaResult r = argmax_lma(s, t, 0.0);
    REQUIRE(r.ok);
    CHECK(std::abs(r.d - d) < 1e-4);
    CHECK(r.ellipse[0] == doctest::Approx(1 / 1.44).epsilon(1e-3));
}
