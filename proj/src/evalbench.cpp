#include "ringstereo/evalbench.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "ringstereo/parallel.hpp"
#include "ringstereo/rng.hpp"

namespace ringstereo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr uint64_t kIntrinsicTag = 0x1a7;

double pair_count_equivalent(int sensors) { return sensors <= 2 ? 1.0 : sensors; }

double predicted_gain(int sa, int ka, int sb, int kb) {
    return std::sqrt(pair_count_equivalent(sb) * kb / (pair_count_equivalent(sa) * ka));
}

}  // namespace

ReferenceSource parse_reference_source(const std::string& s) {
    if (s == "truth") return ReferenceSource::Truth;
    if (s == "measured") return ReferenceSource::Measured;
    throw UsageError("unknown reference source '" + s + "' (expected truth or measured)");
}

std::string to_string(ReferenceSource r) { return r == ReferenceSource::Truth ? "truth" : "measured"; }

std::string Curve::label() const {
    return std::to_string(sensors) + "-sensor " + std::to_string(scenes) + "-scene";
}

const Curve* NoiseSweepResult::find(int sensors, int scenes) const {
    for (const auto& c : curves)
        if (c.sensors == sensors && c.scenes == scenes) return &c;
    return nullptr;
}

std::string GainEntry::label() const {
    std::ostringstream s;
    s << sensors_b << "-sensor " << scenes_b << "-scene over " << sensors_a << "-sensor " << scenes_a << "-scene";
    return s.str();
}

const GainEntry* GainReport::find(int sa, int ka, int sb, int kb) const {
    for (const auto& g : gains)
        if (g.sensors_a == sa && g.scenes_a == ka && g.sensors_b == sb && g.scenes_b == kb) return &g;
    return nullptr;
}

std::vector<int> bench_subset(const RigModel& rig, int count) { return evenly_spaced_subset(rig, count); }

DisparityMap reference_map(const SceneModel& scene, const RigModel& rig, ReferenceSource src, const BenchConfig& cfg,
                           int threads) {
    DisparityMap truth = DisparityMap::for_image(rig.width, rig.height);
    for (size_t i = 0; i < truth.size(); ++i) {
        const IVec2 c = truth.center_of(i);
        double s = 0.0;
        for (int y = c.y - 4; y < c.y + 4; ++y)
            for (int x = c.x - 4; x < c.x + 4; ++x) s += scene.truth.at(x, y);
        truth.tiles[i].disparity = s / 64.0;
        truth.tiles[i].status = TileStatus::Converged;
        truth.tiles[i].last_step = 0.0;
    }
    if (src == ReferenceSource::Truth) return truth;
    const std::vector<Image> clean = render_views(scene, rig, Pose6::identity()).images;
    PipelineOptions po;
    po.fat_zero = cfg.fat_zero;
    po.max_iterations = cfg.iterations;
    std::vector<int> all(rig.n_sensors);
    for (int i = 0; i < rig.n_sensors; ++i) all[i] = i;
    DisparityMap m = build_map(clean, rig, all, MapInit::from_map(truth, cfg.init_offset), po, threads);
    for (auto& t : m.tiles)
        if (t.status != TileStatus::Converged) t = TileResult{};
    return m;
}

NoiseSweepResult run_sweep(const BenchConfig& cfg, int threads) {
    if (cfg.noise_levels.empty()) throw UsageError("empty noise grid");
    if (cfg.instances < 1) throw UsageError("need at least one noise instance");
    for (double n : cfg.noise_levels)
        if (n < 0) throw UsageError("noise levels must be non-negative");
    const RigModel& rig = cfg.rig;
    rig.validate();
    const SceneModel scene = make_scene(cfg.scene, rig.width, rig.height, cfg.contrast, cfg.seed, cfg.scene_params);
    const std::vector<Image> clean = render_views(scene, rig, Pose6::identity()).images;
    const DisparityMap ref = reference_map(scene, rig, cfg.reference, cfg, threads);
    if (ref.size() == 0) throw DataError("missing reference map");

    PipelineOptions po;
    po.fat_zero = cfg.fat_zero;
    po.argmax = ArgmaxKind::Com;
    po.max_iterations = cfg.iterations;
    po.divergence_limit = std::numeric_limits<double>::infinity();

    // Tiles that the noiseless all-sensor pipeline can follow from the offset start.
    std::vector<size_t> tiles;
    {
        std::vector<int> all(rig.n_sensors);
        for (int i = 0; i < rig.n_sensors; ++i) all[i] = i;
        const TileCorrelator tc(rig, all, po);
        const std::vector<SceneView> views{SceneView{&clean, Pose6::identity()}};
        std::vector<char> ok(ref.size(), 0);
        parallel_for(ref.size(), threads, [&](size_t i) {
            const TileResult& rt = ref.tiles[i];
            if (rt.status == TileStatus::NoData) return;
            const TileResult r = refine_tile(tc, views, ref.center_of(i), rt.disparity + cfg.init_offset);
            ok[i] = r.status != TileStatus::NoData;
        });
        for (size_t i = 0; i < ok.size(); ++i)
            if (ok[i]) tiles.push_back(i);
    }
    if (tiles.empty()) throw DataError("no evaluable tiles");

    NoiseSweepResult res;
    res.config = cfg;
    res.evaluable_tiles = static_cast<int>(tiles.size());
    const bool inter = cfg.scenes > 1;
    for (int n : cfg.sensor_counts) {
        Curve c;
        c.sensors = n;
        for (double lv : cfg.noise_levels) c.points.push_back({lv, kNaN, 0.0, 0, 0});
        res.curves.push_back(c);
    }
    if (inter) {
        const int largest = *std::max_element(cfg.sensor_counts.begin(), cfg.sensor_counts.end());
        for (int n : cfg.sensor_counts) {
            if (!cfg.interscene_all_subsets && n != largest) continue;
            Curve c;
            c.sensors = n;
            c.scenes = cfg.scenes;
            for (double lv : cfg.noise_levels)
                c.points.push_back({lv * cfg.interscene_noise_scale, kNaN, 0.0, 0, 0});
            res.curves.push_back(c);
        }
    }

    struct Job {
        size_t curve, point;
        int instance;
        long converged = 0;
        double sq = 0.0;
    };
    std::vector<Job> jobs;
    for (size_t c = 0; c < res.curves.size(); ++c)
        for (size_t p = 0; p < res.curves[c].points.size(); ++p) {
            const int inst = res.curves[c].scenes > 1 ? 1 : cfg.instances;
            for (int i = 0; i < inst; ++i) jobs.push_back({c, p, i});
        }

    const uint64_t noise_seed = derive_seed(cfg.seed, {tag(Stream::Noise)});
    const uint64_t intrinsic_seed = derive_seed(cfg.seed, {tag(Stream::Noise), kIntrinsicTag});
    // Heaviest jobs first keeps the workers balanced; results land in fixed slots either way.
    std::vector<size_t> order(jobs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const Curve &ca = res.curves[jobs[a].curve], &cb = res.curves[jobs[b].curve];
        return ca.scenes * ca.sensors * ca.sensors > cb.scenes * cb.sensors * cb.sensors;
    });
    parallel_for(jobs.size(), threads, [&](size_t oi) {
        Job& job = jobs[order[oi]];
        const Curve& curve = res.curves[job.curve];
        const double level = curve.points[job.point].noise;
        const std::vector<int> subset = bench_subset(rig, curve.sensors);
        std::vector<std::vector<Image>> scenes(curve.scenes, std::vector<Image>(rig.n_sensors));
        for (int k = 0; k < curve.scenes; ++k) {
            const int idx = curve.scenes > 1 ? k : job.instance;
            for (int s : subset) {
                Image img = clean[s];
                if (level > 0) {
                    const Image n = noise_field(noise_seed, s, idx, rig.width, rig.height);
                    for (size_t p = 0; p < img.px.size(); ++p) img.px[p] += level * n.px[p];
                }
                if (cfg.intrinsic_noise > 0) {
                    const Image n = noise_field(intrinsic_seed, s, idx, rig.width, rig.height);
                    for (size_t p = 0; p < img.px.size(); ++p) img.px[p] += cfg.intrinsic_noise * n.px[p];
                }
                scenes[k][s] = std::move(img);
            }
        }
        std::vector<SceneView> views;
        for (const auto& sc : scenes) views.push_back({&sc, Pose6::identity()});
        const TileCorrelator tc(rig, subset, po);
        for (size_t i : tiles) {
            const double rd = ref.tiles[i].disparity;
            const TileResult r = refine_tile(tc, views, ref.center_of(i), rd + cfg.init_offset);
            if (r.status == TileStatus::NoData || !(r.last_step < cfg.settle_step)) continue;
            const double e = r.disparity - rd;
            if (!(std::abs(e) < cfg.diverge_error)) continue;
            ++job.converged;
            job.sq += e * e;
        }
    });

    for (size_t c = 0; c < res.curves.size(); ++c)
        for (size_t p = 0; p < res.curves[c].points.size(); ++p) {
            long conv = 0, total = 0;
            double sq = 0.0;
            for (const Job& j : jobs)
                if (j.curve == c && j.point == p) {
                    conv += j.converged;
                    sq += j.sq;
                    total += static_cast<long>(tiles.size());
                }
            CurvePoint& pt = res.curves[c].points[p];
            pt.converged = conv;
            pt.tiles = total;
            pt.density = total > 0 ? static_cast<double>(conv) / total : 0.0;
            pt.rmse = conv > 0 ? std::sqrt(sq / conv) : kNaN;
        }
    return res;
}

namespace {

struct Monotone {
    std::vector<double> x, y;
};

// Curve as (noise, value) with the value forced monotone: running max for RMSE, running min for
// density.
Monotone monotone_curve(const Curve& c, bool rmse) {
    Monotone m;
    for (const auto& p : c.points) {
        const double v = rmse ? p.rmse : p.density;
        if (!std::isfinite(v)) continue;
        double y = v;
        if (!m.y.empty()) y = rmse ? std::max(y, m.y.back()) : std::min(y, m.y.back());
        m.x.push_back(p.noise);
        m.y.push_back(y);
    }
    return m;
}

// Smallest noise at which the monotone curve reaches v.
double invert(const Monotone& m, double v, bool increasing) {
    for (size_t i = 0; i + 1 < m.x.size(); ++i) {
        const double a = m.y[i], b = m.y[i + 1];
        const bool inside = increasing ? (a <= v && v <= b) : (a >= v && v >= b);
        if (!inside) continue;
        if (a == b) return m.x[i];
        return m.x[i] + (v - a) / (b - a) * (m.x[i + 1] - m.x[i]);
    }
    return kNaN;
}

std::vector<std::pair<double, double>> matched_ratios(const Curve& a, const Curve& b, bool rmse, double sigma0,
                                                      const GainOptions& o) {
    std::vector<std::pair<double, double>> out;
    const Monotone ma = monotone_curve(a, rmse), mb = monotone_curve(b, rmse);
    if (ma.x.size() < 2 || mb.x.size() < 2) return out;
    auto range = [&](const Monotone& m) {
        return std::pair{*std::min_element(m.y.begin(), m.y.end()), *std::max_element(m.y.begin(), m.y.end())};
    };
    const auto [alo, ahi] = range(ma);
    const auto [blo, bhi] = range(mb);
    double lo = std::max(alo, blo), hi = std::min(ahi, bhi);
    if (rmse) {
        const double span = hi - lo;
        hi = lo + o.rmse_hi * span;
        lo = lo + o.rmse_lo * span;
    } else {
        lo = std::max(lo, o.density_lo);
        hi = std::min(hi, o.density_hi);
    }
    if (!(hi > lo)) return out;
    for (int j = 0; j < o.samples; ++j) {
        const double v = lo + (hi - lo) * (j + 0.5) / o.samples;
        const double sa = invert(ma, v, rmse), sb = invert(mb, v, rmse);
        if (!std::isfinite(sa) || !std::isfinite(sb)) continue;
        const double ea = std::sqrt(sigma0 * sigma0 + sa * sa), eb = std::sqrt(sigma0 * sigma0 + sb * sb);
        if (!(ea > 0) || !(eb > 0)) continue;
        out.push_back({v, eb / ea});
    }
    return out;
}

double mean_ratio(const std::vector<std::pair<double, double>>& r) {
    if (r.empty()) return kNaN;
    double s = 0.0;
    for (const auto& p : r) s += p.second;
    return s / r.size();
}

struct PairSpec {
    int sa, ka, sb, kb;
};

std::vector<PairSpec> comparison_pairs(const NoiseSweepResult& r) {
    std::vector<PairSpec> out;
    const int base = 2;
    if (!r.find(base, 1)) return out;
    for (const auto& c : r.curves)
        if (c.scenes == 1 && c.sensors != base) out.push_back({base, 1, c.sensors, 1});
    for (const auto& c : r.curves) {
        if (c.scenes == 1) continue;
        if (r.find(c.sensors, 1)) out.push_back({c.sensors, 1, c.sensors, c.scenes});
        if (c.sensors != base) out.push_back({base, 1, c.sensors, c.scenes});
    }
    // Binocular accumulated over binocular single last, so NETD rows find it.
    for (const auto& c : r.curves)
        if (c.scenes > 1 && c.sensors == base) out.push_back({base, 1, base, c.scenes});
    std::vector<PairSpec> uniq;
    for (const auto& p : out) {
        bool seen = false;
        for (const auto& q : uniq) seen = seen || (q.sa == p.sa && q.ka == p.ka && q.sb == p.sb && q.kb == p.kb);
        if (!seen) uniq.push_back(p);
    }
    return uniq;
}

}  // namespace

GainEntry compare_curves(const Curve& a, const Curve& b, double sigma0, const GainOptions& opts) {
    GainEntry g;
    g.sensors_a = a.sensors;
    g.scenes_a = a.scenes;
    g.sensors_b = b.sensors;
    g.scenes_b = b.scenes;
    g.predicted = predicted_gain(a.sensors, a.scenes, b.sensors, b.scenes);
    g.rmse_ratios = matched_ratios(a, b, true, sigma0, opts);
    g.density_ratios = matched_ratios(a, b, false, sigma0, opts);
    g.rmse_gain = mean_ratio(g.rmse_ratios);
    g.density_gain = mean_ratio(g.density_ratios);
    const bool hr = std::isfinite(g.rmse_gain), hd = std::isfinite(g.density_gain);
    g.defined = hr || hd;
    g.gain = hr && hd ? 0.5 * (g.rmse_gain + g.density_gain) : (hr ? g.rmse_gain : (hd ? g.density_gain : kNaN));
    return g;
}

double fit_intrinsic_noise(const NoiseSweepResult& result, const GainOptions& opts, std::string* warning) {
    const auto pairs = comparison_pairs(result);
    auto objective = [&](double s0) {
        double total = 0.0;
        int groups = 0;
        for (const auto& p : pairs) {
            const GainEntry g = compare_curves(*result.find(p.sa, p.ka), *result.find(p.sb, p.kb), s0, opts);
            for (const auto* r : {&g.rmse_ratios, &g.density_ratios}) {
                if (r->size() < 2) continue;
                double m = 0.0, q = 0.0;
                for (const auto& v : *r) m += std::log(v.second);
                m /= r->size();
                for (const auto& v : *r) q += (std::log(v.second) - m) * (std::log(v.second) - m);
                total += q / r->size();
                ++groups;
            }
        }
        return groups > 0 ? total / groups : kNaN;
    };
    constexpr double kHi = 0.5;
    constexpr int kScan = 51;
    std::vector<double> f(kScan);
    int best = -1;
    for (int i = 0; i < kScan; ++i) {
        f[i] = objective(kHi * i / (kScan - 1));
        if (std::isfinite(f[i]) && (best < 0 || f[i] < f[best])) best = i;
    }
    double fmax = -1.0;
    for (double v : f)
        if (std::isfinite(v)) fmax = std::max(fmax, v);
    if (best < 0 || fmax - f[best] <= 1e-12 * std::max(1.0, fmax)) {
        if (warning) *warning = "intrinsic noise objective is flat; using 0";
        return 0.0;
    }
    double a = kHi * std::max(best - 1, 0) / (kScan - 1), b = kHi * std::min(best + 1, kScan - 1) / (kScan - 1);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = objective(c), fd = objective(d);
    for (int it = 0; it < 40; ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = objective(d);
        }
    }
    const double x = 0.5 * (a + b);
    return objective(x) <= f[best] ? x : kHi * best / (kScan - 1);
}

double system_netd(double gain, double sensor_netd_mk) { return sensor_netd_mk / gain; }

double round_netd(double netd_mk) { return std::round(netd_mk * 10.0) / 10.0; }

GainReport gain_ratios(const NoiseSweepResult& result, const GainOptions& opts, double sensor_netd_mk) {
    GainReport rep;
    if (opts.sigma0 >= 0) {
        rep.sigma0 = opts.sigma0;
    } else {
        rep.sigma0 = fit_intrinsic_noise(result, opts, &rep.warning);
        rep.sigma0_fitted = true;
    }
    for (const auto& p : comparison_pairs(result))
        rep.gains.push_back(compare_curves(*result.find(p.sa, p.ka), *result.find(p.sb, p.kb), rep.sigma0, opts));

    std::vector<int> counts;
    std::vector<int> scene_counts;
    for (const auto& c : result.curves) {
        if (std::find(counts.begin(), counts.end(), c.sensors) == counts.end()) counts.push_back(c.sensors);
        if (std::find(scene_counts.begin(), scene_counts.end(), c.scenes) == scene_counts.end())
            scene_counts.push_back(c.scenes);
    }
    std::sort(counts.begin(), counts.end());
    std::sort(scene_counts.begin(), scene_counts.end());
    for (int k : scene_counts) {
        NetdRow row;
        row.scenes = k;
        for (int n : counts) {
            row.sensors.push_back(n);
            double gain = kNaN;
            if (n == 2 && k == 1) {
                gain = result.find(2, 1) ? 1.0 : kNaN;
            } else if (const GainEntry* g = rep.find(2, 1, n, k)) {
                gain = g->gain;
            }
            row.netd_mk.push_back(std::isfinite(gain) && gain > 0 ? system_netd(gain, sensor_netd_mk) : kNaN);
        }
        rep.netd.push_back(row);
    }
    return rep;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << std::setprecision(10);
    return out;
}

std::string fmt(double v, int prec = 4) {
    if (!std::isfinite(v)) return "nan";
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

}  // namespace

void write_sweep_csv(const std::filesystem::path& path, const NoiseSweepResult& r) {
    std::ofstream out = open_out(path);
    out << std::setprecision(17);
    out << "config,sensors,scenes,noise,rmse,density,converged,n_tiles\n";
    for (const auto& c : r.curves)
        for (const auto& p : c.points) {
            out << c.sensors << "s" << c.scenes << "k," << c.sensors << ',' << c.scenes << ',' << p.noise << ',';
            if (std::isfinite(p.rmse)) out << p.rmse;
            out << ',' << p.density << ',' << p.converged << ',' << p.tiles << '\n';
        }
}

NoiseSweepResult read_sweep_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("config,sensors,scenes,noise", 0) != 0)
        throw DataError(path.string() + ": not a sweep table");
    NoiseSweepResult r;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (line.back() == ',') f.push_back("");
        if (f.size() != 8) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 8 fields");
        try {
            const int n = std::stoi(f[1]), k = std::stoi(f[2]);
            Curve* c = nullptr;
            for (auto& cv : r.curves)
                if (cv.sensors == n && cv.scenes == k) c = &cv;
            if (!c) {
                r.curves.push_back({n, k, {}});
                c = &r.curves.back();
            }
            CurvePoint p;
            p.noise = std::stod(f[3]);
            p.rmse = f[4].empty() ? kNaN : std::stod(f[4]);
            p.density = std::stod(f[5]);
            p.converged = std::stol(f[6]);
            p.tiles = std::stol(f[7]);
            c->points.push_back(p);
        } catch (const std::logic_error&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    if (r.curves.empty()) throw DataError(path.string() + ": no rows");
    return r;
}

void write_netd_csv(const std::filesystem::path& path, const GainReport& g) {
    std::ofstream out = open_out(path);
    out << "scenes,sensors,netd_mk,netd_mk_rounded\n";
    for (const auto& row : g.netd)
        for (size_t i = 0; i < row.sensors.size(); ++i) {
            out << row.scenes << ',' << row.sensors[i] << ',';
            if (std::isfinite(row.netd_mk[i])) out << row.netd_mk[i] << ',' << fmt(round_netd(row.netd_mk[i]), 1);
            else out << ',';
            out << '\n';
        }
}

void write_gain_report(const std::filesystem::path& path, const GainReport& g, const NoiseSweepResult& r) {
    std::ofstream out = open_out(path);
    const BenchConfig& c = r.config;
    out << "# contrast gain report\n";
    out << "noise_units: standard deviation relative to the full texture range (texture spans contrast "
        << c.contrast << " around 0.5)\n";
    out << "evaluable_tiles: " << r.evaluable_tiles << "\n";
    out << "instances_single_scene: " << c.instances << "\n";
    out << "scenes_accumulated: " << c.scenes << "\n";
    out << "init_offset_px: " << c.init_offset << "\n";
    out << "iterations: " << c.iterations << "\n";
    out << "fat_zero: " << c.fat_zero << "\n";
    out << "settle_step_px: " << c.settle_step << "\n";
    out << "diverge_error_px: " << c.diverge_error << "\n";
    out << "reference: " << to_string(c.reference) << "\n";
    out << "overlap_density_window: [" << c.gain.density_lo << ", " << c.gain.density_hi << "]\n";
    out << "overlap_rmse_window_fraction: [" << c.gain.rmse_lo << ", " << c.gain.rmse_hi << "]\n";
    out << "sigma0: " << fmt(g.sigma0, 5) << (g.sigma0_fitted ? " (fitted)" : " (fixed)") << "\n";
    if (!g.warning.empty()) out << "warning: " << g.warning << "\n";
    out << "\n# gains\n";
    out << "comparison,rmse_gain,density_gain,gain,predicted,rmse_points,density_points\n";
    for (const auto& e : g.gains)
        out << e.label() << ',' << fmt(e.rmse_gain) << ',' << fmt(e.density_gain) << ',' << fmt(e.gain) << ','
            << fmt(e.predicted) << ',' << e.rmse_ratios.size() << ',' << e.density_ratios.size() << '\n';
    out << "\n# system NETD (mK, sensor NETD " << c.sensor_netd_mk << " mK)\n";
    out << "scenes";
    if (!g.netd.empty())
        for (int n : g.netd[0].sensors) out << ',' << n << "-sensor";
    out << '\n';
    for (const auto& row : g.netd) {
        out << row.scenes;
        for (double v : row.netd_mk) out << ',' << (std::isfinite(v) ? fmt(round_netd(v), 1) : "nan");
        out << '\n';
    }
}

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Panel {
    double x0, y0, w, h;
    double xmin, xmax, ymin, ymax;
    double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
    double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

void axes(std::ostream& out, const Panel& p, const std::string& title, const std::string& xl, const std::string& yl) {
    out << "<rect x='" << p.x0 << "' y='" << p.y0 << "' width='" << p.w << "' height='" << p.h
        << "' fill='none' stroke='black'/>\n";
    out << "<text x='" << p.x0 + p.w / 2 << "' y='" << p.y0 - 8 << "' text-anchor='middle' font-size='14'>" << title
        << "</text>\n";
    out << "<text x='" << p.x0 + p.w / 2 << "' y='" << p.y0 + p.h + 34 << "' text-anchor='middle' font-size='12'>" << xl
        << "</text>\n";
    out << "<text x='" << p.x0 - 44 << "' y='" << p.y0 + p.h / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 "
        << p.x0 - 44 << ' ' << p.y0 + p.h / 2 << ")'>" << yl << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = p.xmin + (p.xmax - p.xmin) * i / 4, yv = p.ymin + (p.ymax - p.ymin) * i / 4;
        out << "<text x='" << p.px(xv) << "' y='" << p.y0 + p.h + 16 << "' text-anchor='middle' font-size='10'>"
            << fmt(xv, 2) << "</text>\n";
        out << "<text x='" << p.x0 - 6 << "' y='" << p.py(yv) + 4 << "' text-anchor='end' font-size='10'>" << fmt(yv, 2)
            << "</text>\n";
    }
}

void polyline(std::ostream& out, const Panel& p, const std::vector<std::pair<double, double>>& pts, const char* color,
              bool dashed) {
    if (pts.empty()) return;
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5'" << (dashed ? " stroke-dasharray='5,3'" : "")
        << " points='";
    for (const auto& [x, y] : pts) out << p.px(x) << ',' << p.py(y) << ' ';
    out << "'/>\n";
}

}  // namespace

void write_curves_svg(const std::filesystem::path& path, const NoiseSweepResult& r) {
    std::ofstream out = open_out(path);
    double xmax = 0.0, ymax = 0.0;
    for (const auto& c : r.curves)
        for (const auto& p : c.points) {
            xmax = std::max(xmax, p.noise);
            if (std::isfinite(p.rmse)) ymax = std::max(ymax, p.rmse);
        }
    if (xmax <= 0) xmax = 1.0;
    if (ymax <= 0) ymax = 1.0;
    const Panel a{70, 40, 380, 300, 0, xmax, 0, ymax * 1.05}, b{560, 40, 380, 300, 0, xmax, 0, 1.0};
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='1000' height='430' font-family='sans-serif'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    axes(out, a, "a) RMSE", "added noise (relative)", "RMSE, px");
    axes(out, b, "b) density", "added noise (relative)", "converged fraction");
    std::vector<int> counts;
    for (const auto& c : r.curves)
        if (std::find(counts.begin(), counts.end(), c.sensors) == counts.end()) counts.push_back(c.sensors);
    int legend = 0;
    for (const auto& c : r.curves) {
        const auto ci = std::find(counts.begin(), counts.end(), c.sensors) - counts.begin();
        const char* color = kColors[ci % 6];
        std::vector<std::pair<double, double>> pr, pd;
        for (const auto& p : c.points) {
            if (std::isfinite(p.rmse)) pr.push_back({p.noise, p.rmse});
            pd.push_back({p.noise, p.density});
        }
        polyline(out, a, pr, color, c.scenes == 1);
        polyline(out, b, pd, color, c.scenes == 1);
        out << "<text x='" << 70 + 230 * (legend % 4) << "' y='" << 385 + 16 * (legend / 4) << "' font-size='11' fill='" << color << "'>"
            << c.label() << (c.scenes == 1 ? " (dashed)" : "") << "</text>\n";
        ++legend;
    }
    out << "</svg>\n";
}

void write_gains_svg(const std::filesystem::path& path, const GainReport& g) {
    std::ofstream out = open_out(path);
    double rmax = 0.0, gmax = 1.0;
    for (const auto& e : g.gains) {
        for (const auto& p : e.rmse_ratios) {
            rmax = std::max(rmax, p.first);
            gmax = std::max(gmax, p.second);
        }
        for (const auto& p : e.density_ratios) gmax = std::max(gmax, p.second);
    }
    if (rmax <= 0) rmax = 1.0;
    const Panel a{70, 40, 380, 300, 0, rmax, 0, gmax * 1.1}, b{560, 40, 380, 300, 0, 1.0, 0, gmax * 1.1};
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='1000' height='" << 400 + 16 * g.gains.size()
        << "' font-family='sans-serif'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    axes(out, a, "gain at matched RMSE", "RMSE, px", "noise ratio");
    axes(out, b, "gain at matched density", "converged fraction", "noise ratio");
    for (size_t i = 0; i < g.gains.size(); ++i) {
        const GainEntry& e = g.gains[i];
        const char* color = kColors[i % 6];
        polyline(out, a, e.rmse_ratios, color, false);
        polyline(out, b, e.density_ratios, color, false);
        out << "<text x='70' y='" << 390 + 16 * i << "' font-size='11' fill='" << color << "'>" << e.label()
            << ": " << fmt(e.gain, 2) << " (predicted " << fmt(e.predicted, 2) << ")</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace ringstereo
