#include "ringstereo/disparity.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include "ringstereo/parallel.hpp"

namespace ringstereo {

std::string to_string(TileStatus s) {
    switch (s) {
        case TileStatus::Converged: return "converged";
        case TileStatus::Diverged: return "diverged";
        case TileStatus::NoData: return "no-data";
    }
    return "?";
}

ArgmaxKind parse_argmax_kind(const std::string& s) {
    if (s == "com") return ArgmaxKind::Com;
    if (s == "lma") return ArgmaxKind::Lma;
    throw UsageError("unknown argmax kind '" + s + "' (expected com or lma)");
}

std::string to_string(ArgmaxKind k) { return k == ArgmaxKind::Com ? "com" : "lma"; }

IVec2 grid_dims(int width, int height) {
    return {(width + kStride - 1) / kStride - 1, (height + kStride - 1) / kStride - 1};
}

DisparityMap DisparityMap::for_image(int width, int height) {
    const IVec2 g = grid_dims(width, height);
    return DisparityMap(g.x, g.y);
}

TileCorrelator::TileCorrelator(const RigModel& rig, const std::vector<int>& subset, const PipelineOptions& opts)
    : rig_(rig), table_(make_pair_table(rig, subset)), opts_(opts), cons_(table_), frame_(PoseFrame::of(rig, opts.d_ref)) {
    rig_.validate();
    if (opts_.fat_zero < 0) throw UsageError("fat zero must be non-negative");
    if (opts_.max_iterations < 1) throw UsageError("max_iterations must be at least 1");
}

TileCorrelator::Outcome TileCorrelator::accumulate(const std::vector<SceneView>& scenes, IVec2 center, double d) const {
    Outcome o;
    const size_t np = table_.pairs.size();
    const size_t ns = table_.subset.size();
    o.cross.resize(np);
    for (auto& c : o.cross) {
        c.cells.fill(cplx(0.0, 0.0));
        c.weight = 0.0;
    }
    std::vector<int> slot(static_cast<size_t>(rig_.n_sensors), -1);
    for (size_t k = 0; k < ns; ++k) slot[table_.subset[k]] = static_cast<int>(k);

    std::vector<Vec2> shift(ns);
    std::vector<IVec2> ishift(ns);
    std::vector<Spectrum> fd(ns);
    Spectrum cs;
    const Vec2 c0{static_cast<double>(center.x), static_cast<double>(center.y)};
    for (const SceneView& sv : scenes) {
        const Projection pr = transform_observation(sv.pose, frame_, c0, d);
        if (!pr.valid || !std::isfinite(pr.pixel.x) || !std::isfinite(pr.pixel.y)) continue;
        const IVec2 c{static_cast<int>(std::lround(pr.pixel.x)), static_cast<int>(std::lround(pr.pixel.y))};
        const Vec2 off{pr.pixel.x - c.x, pr.pixel.y - c.y};
        const std::vector<Image>& imgs = *sv.images;
        bool usable = true;
        for (size_t k = 0; k < ns && usable; ++k) {
            const int s = table_.subset[k];
            shift[k] = rig_.unit_shift(s) * pr.disparity + rig_.residual_of(s) + off;
            ishift[k] = split_shift(shift[k]).integer;
            usable = tile_in_bounds(imgs[s], {c.x + ishift[k].x, c.y + ishift[k].y});
        }
        if (!usable) continue;
        // Windows of two sensors that drift apart by half a tile no longer share enough content.
        int lox = ishift[0].x, hix = lox, loy = ishift[0].y, hiy = loy;
        for (const IVec2& s : ishift) {
            lox = std::min(lox, s.x);
            hix = std::max(hix, s.x);
            loy = std::min(loy, s.y);
            hiy = std::max(hiy, s.y);
        }
        if (hix - lox > kTile / 2 || hiy - loy > kTile / 2) continue;
        for (size_t k = 0; k < ns; ++k) {
            const int s = table_.subset[k];
            fd[k] = prepare_tile(imgs[s], c, shift[k], s, opts_.front).spectrum;
        }
        for (size_t p = 0; p < np; ++p) {
            const PairInfo& pi = table_.pairs[p];
            cross_spectrum_into(fd[slot[pi.i]], fd[slot[pi.j]], cs);
            if (opts_.normalize_per_scene) cs = phase_normalize(cs, opts_.fat_zero);
            Spectrum& acc = o.cross[p].cells;
            for (int i = 0; i < kTileCells; ++i) acc[i] += cs[i];
        }
        ++o.contributions;
    }
    if (o.contributions == 0) {
        o.no_data = true;
        return o;
    }
    const double inv = 1.0 / o.contributions;
    for (auto& c : o.cross) {
        for (auto& v : c.cells) v *= inv;
        c.weight = o.contributions;
    }
    return o;
}

std::vector<CorrTile> TileCorrelator::surfaces(const Outcome& o) const {
    std::vector<CorrTile> s(o.cross.size());
    auto norm = [&](size_t p) {
        return opts_.normalize_per_scene ? o.cross[p].cells : phase_normalize(o.cross[p], opts_.fat_zero);
    };
    size_t p = 0;
    for (; p + 1 < o.cross.size(); p += 2) correlations_from_normalized(norm(p), norm(p + 1), s[p], s[p + 1]);
    if (p < o.cross.size()) s[p] = correlation_from_normalized(norm(p));
    for (size_t q = 0; q < s.size(); ++q) s[q].pair = static_cast<int>(q);
    return s;
}

TileCorrelator::Measurement TileCorrelator::measure(const Outcome& o) const {
    Measurement m;
    if (o.no_data) return m;
    const std::vector<CorrTile> s = surfaces(o);
    m.combined = cons_.combine(s);
    if (opts_.argmax == ArgmaxKind::Lma) {
        const LmaResult r = argmax_lma(s, table_, 0.0, opts_.lma);
        if (r.ok) {
            m.ok = true;
            m.residual = r.d;
            m.strength = r.strength;
            return m;
        }
    }
    const Peak pk = argmax_com(m.combined, opts_.com);
    if (!pk.ok) return m;
    m.ok = true;
    m.residual = pk.dx / kReferenceBaseline;
    m.strength = pk.strength;
    return m;
}

TileResult refine_tile(const TileCorrelator& tc, const std::vector<SceneView>& scenes, IVec2 center, double d0,
                       RefineTrace* trace) {
    const PipelineOptions& o = tc.options();
    TileResult r;
    double d = d0;
    int no_peak = 0;
    bool decided = false;
    for (int it = 1; it <= o.max_iterations; ++it) {
        const auto acc = tc.accumulate(scenes, center, d);
        if (acc.no_data) {
            r = TileResult{};
            r.iterations = it;
            return r;
        }
        r.contributions = acc.contributions;
        const auto m = tc.measure(acc);
        r.iterations = it;
        if (!m.ok) {
            if (++no_peak >= 2) {
                r.status = TileStatus::Diverged;
                decided = true;
                break;
            }
            continue;
        }
        d += m.residual;
        r.strength = m.strength;
        r.last_step = std::abs(m.residual);
        if (trace) {
            trace->disparities.push_back(d);
            trace->steps.push_back(m.residual);
        }
        if (std::abs(d - d0) > o.divergence_limit) {
            r.status = TileStatus::Diverged;
            decided = true;
            break;
        }
        if (r.last_step < o.stop_tolerance) {
            r.status = TileStatus::Converged;
            decided = true;
            break;
        }
    }
    r.disparity = d;
    if (!decided) r.status = r.last_step <= o.converged_tolerance ? TileStatus::Converged : TileStatus::Diverged;
    return r;
}

TileResult refine_tile(const std::vector<Image>& images, const TileCorrelator& tc, IVec2 center, double d0,
                       RefineTrace* trace) {
    return refine_tile(tc, {SceneView{&images, Pose6::identity()}}, center, d0, trace);
}

DisparityMap build_map(const TileCorrelator& tc, const std::vector<SceneView>& scenes, int width, int height,
                       const MapInit& init, int threads) {
    DisparityMap map = DisparityMap::for_image(width, height);
    if (init.map && (init.map->grid_w != map.grid_w || init.map->grid_h != map.grid_h))
        throw UsageError("initial map grid does not match the image size");
    parallel_for(map.size(), threads, [&](size_t i) {
        double d0 = init.constant;
        if (init.map) {
            const TileResult& t = init.map->tiles[i];
            if (t.status == TileStatus::NoData || !std::isfinite(t.disparity)) return;
            d0 = t.disparity;
        }
        map.tiles[i] = refine_tile(tc, scenes, map.center_of(i), d0 + init.offset);
    });
    return map;
}

DisparityMap build_map(const std::vector<Image>& images, const RigModel& rig, const std::vector<int>& subset,
                       const MapInit& init, const PipelineOptions& opts, int threads) {
    if (static_cast<int>(images.size()) != rig.n_sensors) throw UsageError("need one image per sensor");
    const TileCorrelator tc(rig, subset, opts);
    return build_map(tc, {SceneView{&images, Pose6::identity()}}, rig.width, rig.height, init, threads);
}

DisparityMap disparity_sweep(const std::vector<Image>& images, const TileCorrelator& tc, const SweepRange& range,
                             int threads) {
    if (!(range.hi >= range.lo)) throw UsageError("empty disparity range");
    if (!(range.step > 0 && range.step <= 2.0)) throw UsageError("sweep step must be in (0, 2] pixels");
    std::vector<double> cand;
    for (int k = 0;; ++k) {
        const double d = range.lo + k * range.step;
        if (d > range.hi + 1e-9) break;
        cand.push_back(d);
    }
    const std::vector<SceneView> scenes{SceneView{&images, Pose6::identity()}};
    DisparityMap map = DisparityMap::for_image(tc.rig().width, tc.rig().height);
    parallel_for(map.size(), threads, [&](size_t i) {
        std::vector<double> peak(cand.size(), std::numeric_limits<double>::quiet_NaN());
        int best = -1;
        for (size_t k = 0; k < cand.size(); ++k) {
            const auto acc = tc.accumulate(scenes, map.center_of(i), cand[k]);
            if (acc.no_data) continue;
            const auto m = tc.measure(acc);
            peak[k] = *std::max_element(m.combined.v.begin(), m.combined.v.end());
            if (best < 0 || peak[k] > peak[best]) best = static_cast<int>(k);
        }
        // A best candidate next to one that could not be evaluated may not be the true maximum.
        if (best < 0) return;
        if (best > 0 && std::isnan(peak[best - 1])) return;
        if (best + 1 < static_cast<int>(cand.size()) && std::isnan(peak[best + 1])) return;
        TileResult& t = map.tiles[i];
        t.disparity = cand[best];
        t.strength = peak[best];
        t.status = TileStatus::Converged;
        t.iterations = 0;
        t.last_step = 0.0;
        t.contributions = 1;
    });
    return map;
}

namespace {

void put_f32(std::ostream& out, double v) {
    const uint32_t b = std::bit_cast<uint32_t>(static_cast<float>(v));
    const unsigned char c[4] = {static_cast<unsigned char>(b), static_cast<unsigned char>(b >> 8),
                                static_cast<unsigned char>(b >> 16), static_cast<unsigned char>(b >> 24)};
    out.write(reinterpret_cast<const char*>(c), 4);
}

double get_f32(std::istream& in) {
    unsigned char c[4];
    in.read(reinterpret_cast<char*>(c), 4);
    if (!in) throw DataError("truncated map plane");
    return std::bit_cast<float>(static_cast<uint32_t>(c[0] | (c[1] << 8) | (c[2] << 16) | (uint32_t(c[3]) << 24)));
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const std::string& s) {
    return stem.parent_path() / (stem.filename().string() + s);
}

}  // namespace

void save_map(const std::filesystem::path& stem, const DisparityMap& map, const std::string& rig_hash,
              const std::vector<std::pair<std::string, std::string>>& params, bool with_contributions) {
    if (!stem.parent_path().empty()) std::filesystem::create_directories(stem.parent_path());
    {
        std::ofstream out(with_suffix(stem, ".disp.f32"), std::ios::binary);
        if (!out) throw DataError("cannot write " + with_suffix(stem, ".disp.f32").string());
        for (const auto& t : map.tiles) put_f32(out, t.disparity);
        for (const auto& t : map.tiles) put_f32(out, t.strength);
    }
    {
        std::ofstream out(with_suffix(stem, ".status.u8"), std::ios::binary);
        for (const auto& t : map.tiles) out.put(static_cast<char>(t.status));
    }
    if (with_contributions) {
        std::ofstream out(with_suffix(stem, ".contrib.u16"), std::ios::binary);
        for (const auto& t : map.tiles) {
            const auto v = static_cast<uint16_t>(std::clamp(t.contributions, 0, 65535));
            out.put(static_cast<char>(v & 0xff));
            out.put(static_cast<char>(v >> 8));
        }
    }
    std::ofstream side(with_suffix(stem, ".txt"));
    side << "ringstereo-map 1\n";
    side << "grid " << map.grid_w << " " << map.grid_h << "\n";
    side << "tile 16 stride 8\n";
    side << "planes disparity strength (float32 little-endian, row-major)\n";
    side << "status 0=converged 1=diverged 2=no-data (uint8)\n";
    if (with_contributions) side << "contributions uint16 little-endian\n";
    side << "rig " << rig_hash << "\n";
    for (const auto& [k, v] : params) side << "param " << k << " " << v << "\n";
}

DisparityMap load_map(const std::filesystem::path& stem) {
    std::ifstream side(with_suffix(stem, ".txt"));
    if (!side) throw DataError("cannot read " + with_suffix(stem, ".txt").string());
    std::string line;
    std::getline(side, line);
    if (line != "ringstereo-map 1") throw DataError("not a disparity map sidecar: " + stem.string());
    int gw = -1, gh = -1;
    bool contrib = false;
    while (std::getline(side, line)) {
        std::istringstream s(line);
        std::string key;
        s >> key;
        if (key == "grid") s >> gw >> gh;
        if (key == "contributions") contrib = true;
    }
    if (gw <= 0 || gh <= 0) throw DataError("map sidecar lacks grid dimensions");
    DisparityMap map(gw, gh);
    std::ifstream planes(with_suffix(stem, ".disp.f32"), std::ios::binary);
    if (!planes) throw DataError("cannot read " + with_suffix(stem, ".disp.f32").string());
    for (auto& t : map.tiles) t.disparity = get_f32(planes);
    for (auto& t : map.tiles) t.strength = get_f32(planes);
    std::ifstream st(with_suffix(stem, ".status.u8"), std::ios::binary);
    for (auto& t : map.tiles) {
        const int c = st.get();
        if (c < 0 || c > 2) throw DataError("bad status plane");
        t.status = static_cast<TileStatus>(c);
    }
    if (contrib) {
        std::ifstream cs(with_suffix(stem, ".contrib.u16"), std::ios::binary);
        for (auto& t : map.tiles) {
            const int lo = cs.get(), hi = cs.get();
            if (lo < 0 || hi < 0) throw DataError("truncated contributions plane");
            t.contributions = lo | (hi << 8);
        }
    }
    return map;
}

void export_csv(const std::filesystem::path& path, const DisparityMap& map) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "tile_x,tile_y,disparity,strength,status\n";
    out.precision(9);
    for (int ty = 0; ty < map.grid_h; ++ty)
        for (int tx = 0; tx < map.grid_w; ++tx) {
            const TileResult& t = map.at(tx, ty);
            out << tx << ',' << ty << ',';
            if (t.status != TileStatus::NoData) out << t.disparity;
            out << ',' << t.strength << ',' << to_string(t.status) << '\n';
        }
}

}  // namespace ringstereo
