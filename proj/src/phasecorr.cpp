#include "ringstereo/phasecorr.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>

namespace ringstereo {

void cross_spectrum_into(const Spectrum& a, const Spectrum& b, Spectrum& out) {
    for (int i = 0; i < kTileCells; ++i) {
        const double ar = a[i].real(), ai = a[i].imag(), br = b[i].real(), bi = b[i].imag();
        out[i] = {ar * br + ai * bi, ai * br - ar * bi};
    }
}

CrossSpectrum cross_spectrum(const FdTile& a, const FdTile& b) {
    CrossSpectrum cs;
    cross_spectrum_into(a.spectrum, b.spectrum, cs.cells);
    return cs;
}

Spectrum phase_normalize(const Spectrum& cs, double fz) {
    if (fz < 0) throw UsageError("fat zero must be non-negative");
    std::array<double, kTileCells> mag{};
    double s = 0.0;
    for (int i = 0; i < kTileCells; ++i) {
        mag[i] = std::sqrt(std::norm(cs[i]));
        s += mag[i];
    }
    s /= kTileCells;
    Spectrum out;
    const double add = fz * s;
    for (int i = 0; i < kTileCells; ++i) {
        const double den = mag[i] + add;
        out[i] = den > 0 ? cs[i] * (1.0 / den) : cplx(0.0, 0.0);
    }
    return out;
}

Spectrum phase_normalize(const CrossSpectrum& cs, double fz) { return phase_normalize(cs.cells, fz); }

CorrTile correlation_from_normalized(const Spectrum& normalized, int pair) {
    Spectrum t;
    for (int i = 0; i < kTileCells; ++i) t[i] = std::conj(normalized[i]);
    ifft16x16(t);
    CorrTile c;
    c.pair = pair;
    for (int r = 0; r < kTile; ++r)
        for (int col = 0; col < kTile; ++col)
            c.v[((r + 8) % kTile) * kTile + (col + 8) % kTile] = t[r * kTile + col].real();
    return c;
}

void correlations_from_normalized(const Spectrum& a, const Spectrum& b, CorrTile& ca, CorrTile& cb) {
    // The real part of an inverse transform only sees the Hermitian part of its input, so after
    // symmetrizing both, one inverse transform yields the two surfaces as real and imaginary parts.
    Spectrum t;
    for (int v = 0; v < kTile; ++v)
        for (int u = 0; u < kTile; ++u) {
            const int i = v * kTile + u, m = ((kTile - v) % kTile) * kTile + (kTile - u) % kTile;
            // Hermitian parts of conj(a) and conj(b).
            const double pr = 0.5 * (a[i].real() + a[m].real()), pi = 0.5 * (a[m].imag() - a[i].imag());
            const double qr = 0.5 * (b[i].real() + b[m].real()), qi = 0.5 * (b[m].imag() - b[i].imag());
            t[i] = {pr - qi, pi + qr};
        }
    ifft16x16(t);
    for (int r = 0; r < kTile; ++r)
        for (int col = 0; col < kTile; ++col) {
            const int dst = ((r + 8) % kTile) * kTile + (col + 8) % kTile;
            ca.v[dst] = t[r * kTile + col].real();
            cb.v[dst] = t[r * kTile + col].imag();
        }
}

CorrTile pair_correlation(const FdTile& a, const FdTile& b, double fz, int pair) {
    return correlation_from_normalized(phase_normalize(cross_spectrum(a, b), fz), pair);
}

Consolidator::Consolidator(const PairTable& table) {
    maps_.resize(table.pairs.size());
    for (size_t p = 0; p < table.pairs.size(); ++p) {
        const PairInfo& info = table.pairs[p];
        const double phi = -info.rotation;
        const double c = std::cos(phi), s = std::sin(phi);
        for (int r = 0; r < kTile; ++r)
            for (int col = 0; col < kTile; ++col) {
                const double xi = col - 8.0, yi = r - 8.0;
                const double px = info.scale * (c * xi - s * yi) + 8.0;
                const double py = info.scale * (s * xi + c * yi) + 8.0;
                const int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
                const double fx = px - x0, fy = py - y0;
                Tap tap;
                int k = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx, ++k) {
                        const int xx = x0 + dx, yy = y0 + dy;
                        const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
                        const bool inside = xx >= 0 && xx < kTile && yy >= 0 && yy < kTile;
                        tap.idx[k] = static_cast<uint16_t>(inside ? yy * kTile + xx : 0);
                        tap.w[k] = inside ? w : 0.0;
                    }
                maps_[p][r * kTile + col] = tap;
            }
    }
}

CorrTile Consolidator::combine(const CorrTile* const* surfaces, size_t n) const {
    if (n != maps_.size()) throw UsageError("surface count does not match the pair table");
    CorrTile out;
    out.v.fill(0.0);
    for (size_t p = 0; p < n; ++p) {
        const RealGrid& in = surfaces[p]->v;
        const auto& map = maps_[p];
        for (int i = 0; i < kTileCells; ++i) {
            const Tap& t = map[i];
            out.v[i] += t.w[0] * in[t.idx[0]] + t.w[1] * in[t.idx[1]] + t.w[2] * in[t.idx[2]] + t.w[3] * in[t.idx[3]];
        }
    }
    const double inv = n ? 1.0 / static_cast<double>(n) : 0.0;
    for (auto& v : out.v) v *= inv;
    return out;
}

CorrTile Consolidator::combine(const std::vector<CorrTile>& surfaces) const {
    std::vector<const CorrTile*> ptr(surfaces.size());
    for (size_t i = 0; i < surfaces.size(); ++i) ptr[i] = &surfaces[i];
    return combine(ptr.data(), ptr.size());
}

RealGrid Consolidator::weight_energy() const {
    RealGrid e{};
    for (const auto& map : maps_)
        for (int i = 0; i < kTileCells; ++i)
            for (double w : map[i].w) e[i] += w * w;
    return e;
}

CorrTile consolidate(const std::vector<CorrTile>& corrs, const PairTable& table) {
    std::vector<const CorrTile*> order(corrs.size());
    for (size_t i = 0; i < corrs.size(); ++i) order[i] = &corrs[i];
    // Surfaces carrying a pair id are summed in ascending pair order.
    std::stable_sort(order.begin(), order.end(), [](const CorrTile* a, const CorrTile* b) { return a->pair < b->pair; });
    PairTable sub;
    sub.subset = table.subset;
    for (size_t k = 0; k < order.size(); ++k) {
        const int p = order[k]->pair >= 0 ? order[k]->pair : static_cast<int>(k);
        if (p >= static_cast<int>(table.pairs.size())) throw UsageError("pair index out of range");
        sub.pairs.push_back(table.pairs[static_cast<size_t>(p)]);
    }
    return Consolidator(sub).combine(order.data(), order.size());
}

Peak argmax_com(const CorrTile& corr, const ComOptions& opts) {
    Peak pk;
    int best = 0;
    for (int i = 1; i < kTileCells; ++i)
        if (corr.v[i] > corr.v[best]) best = i;
    if (!(corr.v[best] > 0.0)) return pk;
    double cx = best % kTile, cy = best / kTile;
    const double r2max = opts.radius * opts.radius;
    const int passes = std::max(1, opts.iterations);
    double mass = 0.0;
    for (int it = 0; it < passes; ++it) {
        double m = 0.0, sx = 0.0, sy = 0.0;
        for (int r = 0; r < kTile; ++r)
            for (int c = 0; c < kTile; ++c) {
                const double v = corr.v[r * kTile + c];
                if (v <= 0.0) continue;
                const double r2 = (c - cx) * (c - cx) + (r - cy) * (r - cy);
                double w;
                if (opts.kernel == ComKernel::Hard) w = r2 <= r2max ? 1.0 : 0.0;
                else w = std::max(0.0, 1.0 - r2 / r2max);
                if (w == 0.0) continue;
                m += w * v;
                sx += w * v * c;
                sy += w * v * r;
            }
        if (!(m > 0.0)) break;
        mass = m;
        cx = sx / m;
        cy = sy / m;
    }
    if (!(mass > 0.0)) return pk;
    pk.dx = cx - 8.0;
    pk.dy = cy - 8.0;
    pk.strength = mass;
    pk.ok = true;
    return pk;
}

namespace {

struct LmaSample {
    double x, y, val;
};

struct LmaPair {
    Vec2 b, bp;
    std::vector<LmaSample> s;
    double amp = 0.0, off = 0.0;
};

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

double lma_cost(const std::vector<LmaPair>& pairs, const Vec5& g, const std::vector<Eigen::Vector2d>& loc) {
    double cost = 0.0;
    for (size_t p = 0; p < pairs.size(); ++p) {
        const auto& pr = pairs[p];
        const double mx = g[0] * pr.b.x + g[1] * pr.bp.x, my = g[0] * pr.b.y + g[1] * pr.bp.y;
        for (const auto& s : pr.s) {
            const double dx = s.x - mx, dy = s.y - my;
            const double q = g[2] * dx * dx + 2 * g[3] * dx * dy + g[4] * dy * dy;
            const double f = loc[p][0] * std::exp(-0.5 * q) + loc[p][1];
            cost += (f - s.val) * (f - s.val);
        }
    }
    return 0.5 * cost;
}

}  // namespace

LmaResult argmax_lma(const std::vector<CorrTile>& corrs, const PairTable& table, double init_d, const LmaOptions& opts) {
    LmaResult res;
    if (corrs.empty()) return res;
    std::vector<LmaPair> pairs;
    bool any_signal = false;
    size_t n_samples = 0;
    for (size_t k = 0; k < corrs.size(); ++k) {
        const int pi = corrs[k].pair >= 0 ? corrs[k].pair : static_cast<int>(k);
        if (pi >= static_cast<int>(table.pairs.size())) throw UsageError("pair index out of range");
        const PairInfo& info = table.pairs[static_cast<size_t>(pi)];
        LmaPair lp;
        lp.b = info.baseline;
        lp.bp = {-info.baseline.y, info.baseline.x};
        const double mx = init_d * lp.b.x, my = init_d * lp.b.y;
        double peak = -1e300;
        for (int r = 0; r < kTile; ++r)
            for (int c = 0; c < kTile; ++c) {
                const double x = c - 8.0, y = r - 8.0;
                if ((x - mx) * (x - mx) + (y - my) * (y - my) > opts.sample_radius * opts.sample_radius) continue;
                const double v = corrs[k].at(c, r);
                if (v != 0.0) any_signal = true;
                lp.s.push_back({x, y, v});
                peak = std::max(peak, v);
            }
        if (lp.s.empty()) continue;
        lp.amp = std::max(peak, 0.0);
        n_samples += lp.s.size();
        pairs.push_back(std::move(lp));
    }
    if (!any_signal || pairs.empty()) return res;

    const size_t np = pairs.size();
    Vec5 g;
    g << init_d, 0.0, 1.0, 0.0, 1.0;
    std::vector<Eigen::Vector2d> loc(np);
    for (size_t p = 0; p < np; ++p) loc[p] = {pairs[p].amp, pairs[p].off};

    double lambda = 1e-3;
    double cost = lma_cost(pairs, g, loc);
    Mat5 s_final = Mat5::Identity();
    bool converged = false;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        Mat5 hgg = Mat5::Zero();
        Vec5 bg = Vec5::Zero();
        std::vector<Eigen::Matrix2d> hll(np);
        std::vector<Eigen::Matrix<double, 5, 2>> hgl(np);
        std::vector<Eigen::Vector2d> bl(np);
        for (size_t p = 0; p < np; ++p) {
            const auto& pr = pairs[p];
            hll[p].setZero();
            hgl[p].setZero();
            bl[p].setZero();
            const double mx = g[0] * pr.b.x + g[1] * pr.bp.x, my = g[0] * pr.b.y + g[1] * pr.bp.y;
            for (const auto& s : pr.s) {
                const double dx = s.x - mx, dy = s.y - my;
                const double q = g[2] * dx * dx + 2 * g[3] * dx * dy + g[4] * dy * dy;
                const double e = std::exp(-0.5 * q);
                const double r = loc[p][0] * e + loc[p][1] - s.val;
                const double mdx = g[2] * dx + g[3] * dy, mdy = g[3] * dx + g[4] * dy;
                const double ae = loc[p][0] * e;
                Vec5 jg;
                jg << ae * (mdx * pr.b.x + mdy * pr.b.y), ae * (mdx * pr.bp.x + mdy * pr.bp.y), -0.5 * ae * dx * dx,
                    -ae * dx * dy, -0.5 * ae * dy * dy;
                const Eigen::Vector2d jl(e, 1.0);
                hgg.noalias() += jg * jg.transpose();
                hgl[p].noalias() += jg * jl.transpose();
                hll[p].noalias() += jl * jl.transpose();
                bg -= jg * r;
                bl[p] -= jl * r;
            }
        }
        bool stepped = false;
        for (int attempt = 0; attempt < 12 && !stepped; ++attempt) {
            Mat5 sch = hgg;
            sch.diagonal() *= (1.0 + lambda);
            Vec5 rhs = bg;
            std::vector<Eigen::Matrix2d> hinv(np);
            for (size_t p = 0; p < np; ++p) {
                Eigen::Matrix2d h = hll[p];
                h.diagonal() *= (1.0 + lambda);
                h.diagonal().array() += 1e-12;
                hinv[p] = h.inverse();
                sch -= hgl[p] * hinv[p] * hgl[p].transpose();
                rhs -= hgl[p] * hinv[p] * bl[p];
            }
            const Vec5 dg = sch.ldlt().solve(rhs);
            if (!dg.allFinite()) {
                lambda *= 10;
                continue;
            }
            Vec5 gn = g + dg;
            std::vector<Eigen::Vector2d> ln(np);
            for (size_t p = 0; p < np; ++p) ln[p] = loc[p] + hinv[p] * (bl[p] - hgl[p].transpose() * dg);
            const double cn = lma_cost(pairs, gn, ln);
            if (std::isfinite(cn) && cn <= cost) {
                const double rel = dg.norm() / (g.norm() + 1e-12);
                g = gn;
                loc = ln;
                cost = cn;
                lambda = std::max(lambda / 10.0, 1e-9);
                stepped = true;
                if (rel < opts.rel_tolerance) converged = true;
            } else {
                lambda *= 10.0;
            }
        }
        if (!stepped) {
            converged = true;  // no descent direction left at any damping
        }
        if (converged) {
            ++it;
            break;
        }
    }

    // Reduced Hessian at the solution for the covariance estimate.
    {
        Mat5 hgg = Mat5::Zero();
        std::vector<Eigen::Matrix2d> hll(np);
        std::vector<Eigen::Matrix<double, 5, 2>> hgl(np);
        for (size_t p = 0; p < np; ++p) {
            const auto& pr = pairs[p];
            hll[p].setZero();
            hgl[p].setZero();
            const double mx = g[0] * pr.b.x + g[1] * pr.bp.x, my = g[0] * pr.b.y + g[1] * pr.bp.y;
            for (const auto& s : pr.s) {
                const double dx = s.x - mx, dy = s.y - my;
                const double e = std::exp(-0.5 * (g[2] * dx * dx + 2 * g[3] * dx * dy + g[4] * dy * dy));
                const double mdx = g[2] * dx + g[3] * dy, mdy = g[3] * dx + g[4] * dy;
                const double ae = loc[p][0] * e;
                Vec5 jg;
                jg << ae * (mdx * pr.b.x + mdy * pr.b.y), ae * (mdx * pr.bp.x + mdy * pr.bp.y), -0.5 * ae * dx * dx,
                    -ae * dx * dy, -0.5 * ae * dy * dy;
                const Eigen::Vector2d jl(e, 1.0);
                hgg.noalias() += jg * jg.transpose();
                hgl[p].noalias() += jg * jl.transpose();
                hll[p].noalias() += jl * jl.transpose();
            }
            Eigen::Matrix2d h = hll[p];
            h.diagonal().array() += 1e-12;
            hgg -= hgl[p] * h.inverse() * hgl[p].transpose();
        }
        s_final = hgg;
    }

    res.iterations = it;
    res.d = g[0];
    res.dy = g[1];
    res.ellipse = {g[2], g[3], g[4]};
    const bool definite = g[2] > 0 && g[4] > 0 && g[2] * g[4] - g[3] * g[3] > 0;
    double amp_sum = 0.0;
    for (const auto& l : loc) amp_sum += l[0];
    const double mean_amp = amp_sum / static_cast<double>(np);
    const size_t dof = n_samples > 5 + 2 * np ? n_samples - 5 - 2 * np : 1;
    const double sigma2 = 2.0 * cost / static_cast<double>(dof);
    const double rms = std::sqrt(2.0 * cost / static_cast<double>(n_samples));
    res.strength = rms > 0 ? mean_amp / rms : mean_amp * 1e12;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Constant(std::numeric_limits<double>::quiet_NaN());
    Eigen::FullPivLU<Mat5> lu(s_final);
    if (lu.isInvertible()) cov = sigma2 * lu.inverse().topLeftCorner<2, 2>();
    res.covariance = {cov(0, 0), cov(0, 1), cov(1, 0), cov(1, 1)};
    res.ok = definite && mean_amp > 0 && g.allFinite() && std::abs(g[0] - init_d) <= opts.max_excursion;
    (void)converged;
    return res;
}

}  // namespace ringstereo
