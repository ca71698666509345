#include "ringstereo/interscene.hpp"

#include <Eigen/Dense>
#include <algorithm>

#include "ringstereo/parallel.hpp"

namespace ringstereo {

namespace {

bool has_value(const TileResult& t) { return t.status != TileStatus::NoData && std::isfinite(t.disparity); }

// Bilinear weights over the tile centers around a pixel; tiles without a value are dropped and
// the remaining weights renormalized.
template <typename F>
bool interpolate(const DisparityMap& map, Vec2 pixel, F field, double& out) {
    if (map.grid_w == 0 || map.grid_h == 0) return false;
    const double gx = std::clamp(pixel.x / kStride - 1.0, 0.0, map.grid_w - 1.0);
    const double gy = std::clamp(pixel.y / kStride - 1.0, 0.0, map.grid_h - 1.0);
    const int x0 = std::min(static_cast<int>(gx), map.grid_w - 1);
    const int y0 = std::min(static_cast<int>(gy), map.grid_h - 1);
    const double fx = gx - x0, fy = gy - y0;
    double s = 0.0, ws = 0.0;
    for (int j = 0; j <= 1; ++j)
        for (int i = 0; i <= 1; ++i) {
            const double w = (i ? fx : 1.0 - fx) * (j ? fy : 1.0 - fy);
            if (w <= 0.0) continue;
            const TileResult& t = map.at(std::min(x0 + i, map.grid_w - 1), std::min(y0 + j, map.grid_h - 1));
            if (!has_value(t)) continue;
            s += w * field(t);
            ws += w;
        }
    if (ws <= 0.0) return false;
    out = s / ws;
    return true;
}

DisparityMap converged_only(const DisparityMap& m) {
    DisparityMap out = m;
    for (auto& t : out.tiles)
        if (t.status != TileStatus::Converged || t.low_confidence) t = TileResult{};
    return out;
}

}  // namespace

bool sample_map(const DisparityMap& map, Vec2 pixel, double& d) {
    return interpolate(map, pixel, [](const TileResult& t) { return t.disparity; }, d);
}

DisparityMap fill_gaps(const DisparityMap& map) {
    DisparityMap out = map;
    std::vector<size_t> src;
    for (size_t i = 0; i < map.size(); ++i)
        if (has_value(map.tiles[i])) src.push_back(i);
    if (src.empty()) return out;
    for (size_t i = 0; i < map.size(); ++i) {
        if (has_value(map.tiles[i])) continue;
        const int x = static_cast<int>(i % map.grid_w), y = static_cast<int>(i / map.grid_w);
        size_t best = src[0];
        long best_d = -1;
        for (size_t s : src) {
            const long dx = static_cast<long>(s % map.grid_w) - x, dy = static_cast<long>(s / map.grid_w) - y;
            const long d = dx * dx + dy * dy;
            if (best_d < 0 || d < best_d) {
                best_d = d;
                best = s;
            }
        }
        TileResult& t = out.tiles[i];
        t = map.tiles[best];
        t.low_confidence = true;
        t.iterations = 0;
        t.contributions = 0;
    }
    return out;
}

Image virtual_image(const std::vector<Image>& images, const RigModel& rig, const DisparityMap& map) {
    if (static_cast<int>(images.size()) != rig.n_sensors) throw UsageError("need one image per sensor");
    const DisparityMap filled = fill_gaps(map);
    Image out(rig.width, rig.height);
    std::vector<Vec2> u(rig.n_sensors), res(rig.n_sensors);
    for (int s = 0; s < rig.n_sensors; ++s) {
        u[s] = rig.unit_shift(s);
        res[s] = rig.residual_of(s);
    }
    const double inv = 1.0 / rig.n_sensors;
    for (int y = 0; y < rig.height; ++y)
        for (int x = 0; x < rig.width; ++x) {
            double d = 0.0;
            if (!sample_map(filled, {double(x), double(y)}, d)) d = 0.0;
            double v = 0.0;
            for (int s = 0; s < rig.n_sensors; ++s)
                v += sample_catmull_rom(images[s], x + u[s].x * d + res[s].x, y + u[s].y * d + res[s].y);
            out.at(x, y) = v * inv;
        }
    return out;
}

ScenePlanes make_scene_planes(const std::vector<Image>& images, const RigModel& rig, const DisparityMap& map,
                              int scale, double prefilter) {
    if (scale < 1) throw UsageError("plane scale must be at least 1");
    ScenePlanes p;
    p.map = map;
    p.scale = scale;
    Image v = virtual_image(images, rig, map);
    // Box decimation alone aliases the fine texture; near-Nyquist content also resamples poorly
    // between scenes. Either biases the per-tile offsets.
    const double sigma = std::max(prefilter, scale > 1 ? 0.5 * scale : 0.0);
    if (sigma > 0) v = gaussian_blur_clamp(v, sigma);
    p.highpass = highpass3(downscale(v, scale));
    return p;
}

namespace {

struct Observation {
    Vec2 pixel;        // reference tile center in scene a (full resolution)
    double d = 0.0;    // its disparity in scene a
    double w = 1.0;
    Vec2 target;       // measured location in scene b
    double target_d = 0.0;
    bool has_d = false;
};

// Parameters are (t, f * r) so that all six are in pixels.
Pose6 from_scaled(const Eigen::Matrix<double, 6, 1>& q, double f) {
    return {{q[0], q[1], q[2]}, {q[3] / f, q[4] / f, q[5] / f}};
}

Eigen::Matrix<double, 6, 1> to_scaled(const Pose6& p, double f) {
    Eigen::Matrix<double, 6, 1> q;
    q << p.t.x, p.t.y, p.t.z, p.r.x * f, p.r.y * f, p.r.z * f;
    return q;
}

Eigen::VectorXd residuals(const std::vector<Observation>& obs, const PoseFrame& frame, const Pose6& pose) {
    Eigen::VectorXd r(obs.size() * 3);
    for (size_t j = 0; j < obs.size(); ++j) {
        const Observation& o = obs[j];
        const Projection pr = transform_observation(pose, frame, o.pixel, o.d);
        const double sw = std::sqrt(o.w);
        r[3 * j] = sw * (pr.pixel.x - o.target.x);
        r[3 * j + 1] = sw * (pr.pixel.y - o.target.y);
        r[3 * j + 2] = o.has_d ? sw * (pr.disparity - o.target_d) : 0.0;
    }
    return r;
}

// Levenberg-Marquardt on fixed observations, numerical Jacobian.
Pose6 fit_pose(const std::vector<Observation>& obs, const PoseFrame& frame, const Pose6& start) {
    const double f = frame.focal;
    Eigen::Matrix<double, 6, 1> q = to_scaled(start, f);
    Eigen::VectorXd r = residuals(obs, frame, from_scaled(q, f));
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    for (int it = 0; it < 50; ++it) {
        Eigen::MatrixXd J(r.size(), 6);
        for (int k = 0; k < 6; ++k) {
            const double h = 1e-5;
            Eigen::Matrix<double, 6, 1> qp = q, qm = q;
            qp[k] += h;
            qm[k] -= h;
            J.col(k) = (residuals(obs, frame, from_scaled(qp, f)) - residuals(obs, frame, from_scaled(qm, f))) / (2 * h);
        }
        const Eigen::Matrix<double, 6, 6> H = J.transpose() * J;
        const Eigen::Matrix<double, 6, 1> g = J.transpose() * r;
        bool improved = false;
        Eigen::Matrix<double, 6, 1> step;
        for (int tries = 0; tries < 10; ++tries) {
            Eigen::Matrix<double, 6, 6> A = H;
            for (int k = 0; k < 6; ++k) A(k, k) += lambda * std::max(H(k, k), 1e-12);
            step = -A.ldlt().solve(g);
            const Eigen::VectorXd rn = residuals(obs, frame, from_scaled(q + step, f));
            const double c = rn.squaredNorm();
            if (std::isfinite(c) && c <= cost) {
                q += step;
                r = rn;
                cost = c;
                lambda = std::max(lambda * 0.3, 1e-9);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved || step.norm() < 1e-12 * std::max(1.0, q.norm())) break;
    }
    return from_scaled(q, f);
}

}  // namespace

EgomotionResult egomotion_pair(const ScenePlanes& a, const ScenePlanes& b, const RigModel& rig, const Pose6& init,
                               const EgomotionOptions& opts) {
    if (a.scale != b.scale) throw UsageError("scene planes use different scales");
    const int s = a.scale;
    const double off = (s - 1) / 2.0;
    auto full_of = [&](Vec2 p) { return Vec2{p.x * s + off, p.y * s + off}; };
    auto plane_of = [&](Vec2 p) { return Vec2{(p.x - off) / s, (p.y - off) / s}; };
    const PoseFrame frame = PoseFrame::of(rig, opts.d_ref);
    const DisparityMap ma = converged_only(a.map), mb = converged_only(b.map);
    const FrontEndOptions fe;

    struct Anchor {
        IVec2 center;  // plane pixel
        Vec2 pixel;    // full resolution
        double d, w;
        FdTile fd;
    };
    std::vector<Anchor> anchors;
    const IVec2 g = grid_dims(a.highpass.width, a.highpass.height);
    for (int ty = 0; ty < g.y; ++ty)
        for (int tx = 0; tx < g.x; ++tx) {
            const IVec2 c = DisparityMap::tile_center(tx, ty);
            if (!tile_in_bounds(a.highpass, c)) continue;
            const Vec2 p = full_of({double(c.x), double(c.y)});
            double d = 0.0, w = 0.0;
            if (!sample_map(ma, p, d)) continue;
            interpolate(ma, p, [](const TileResult& t) { return t.strength; }, w);
            if (!(w > 0.0)) continue;
            anchors.push_back({c, p, d, w, prepare_tile(a.highpass, c, {0.0, 0.0}, 0, fe)});
        }

    EgomotionResult res;
    Pose6 pose = init;
    std::vector<Observation> obs;
    std::vector<double> offsets;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        obs.clear();
        offsets.clear();
        for (const Anchor& an : anchors) {
            const Projection pr = transform_observation(pose, frame, an.pixel, an.d);
            if (!pr.valid) continue;
            const Vec2 pb = plane_of(pr.pixel);
            const Vec2 shift{pb.x - an.center.x, pb.y - an.center.y};
            if (!std::isfinite(shift.x) || !std::isfinite(shift.y)) continue;
            const IVec2 is = split_shift(shift).integer;
            if (!tile_in_bounds(b.highpass, {an.center.x + is.x, an.center.y + is.y})) continue;
            const FdTile fb = prepare_tile(b.highpass, an.center, shift, 0, fe);
            const Peak pk = argmax_com(pair_correlation(an.fd, fb, opts.fat_zero));
            if (!pk.ok) continue;
            const Vec2 delta{pk.dx * s, pk.dy * s};
            if (delta.norm() > opts.max_offset) continue;
            Observation o;
            o.pixel = an.pixel;
            o.d = an.d;
            o.w = an.w;
            o.target = pr.pixel + delta;
            if (opts.use_disparity) o.has_d = sample_map(mb, o.target, o.target_d);
            obs.push_back(o);
            offsets.push_back(delta.norm());
        }
        if (static_cast<int>(obs.size()) < opts.min_tiles) throw NumericalError("insufficient texture for egomotion");
        if (opts.robust_scale > 0) {
            std::vector<double> sorted = offsets;
            std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
            const double c = std::max(opts.robust_scale * sorted[sorted.size() / 2], 1e-3);
            for (size_t i = 0; i < obs.size(); ++i) obs[i].w /= 1.0 + (offsets[i] / c) * (offsets[i] / c);
        }
        const Pose6 next = fit_pose(obs, frame, pose);
        const auto qa = to_scaled(pose, frame.focal), qb = to_scaled(next, frame.focal);
        const double step = (qb - qa).norm();
        pose = next;
        res.iterations = it;
        if (step < opts.rel_tolerance * std::max(1.0, qb.norm())) break;
    }
    res.pose = pose;
    res.tiles = static_cast<int>(obs.size());
    double e = 0.0, ws = 0.0;
    for (const Observation& o : obs) {
        const Projection pr = transform_observation(pose, frame, o.pixel, o.d);
        e += o.w * ((pr.pixel.x - o.target.x) * (pr.pixel.x - o.target.x) +
                    (pr.pixel.y - o.target.y) * (pr.pixel.y - o.target.y));
        ws += o.w;
    }
    res.rms = ws > 0 ? std::sqrt(e / ws) : 0.0;
    return res;
}

std::vector<Pose6> pairwise_egomotion(const std::vector<ScenePlanes>& planes, const RigModel& rig,
                                      const EgomotionOptions& opts, int threads) {
    std::vector<Pose6> out(planes.size() > 1 ? planes.size() - 1 : 0);
    parallel_for(out.size(), threads, [&](size_t k) {
        try {
            out[k] = egomotion_pair(planes[k + 1], planes[k], rig, Pose6::identity(), opts).pose;
        } catch (const NumericalError&) {
            // Left as identity; the direct refinement against the reference decides exclusion.
            out[k] = Pose6::identity();
        }
    });
    return out;
}

ChainResult chain_to_reference(const std::vector<Pose6>& pairwise, const std::vector<ScenePlanes>& planes,
                               const RigModel& rig, int reference, bool refine, const EgomotionOptions& opts,
                               int threads) {
    const int k_count = static_cast<int>(pairwise.size()) + 1;
    if (reference < 0 || reference >= k_count) throw UsageError("reference scene out of range");
    if (refine && static_cast<int>(planes.size()) != k_count) throw UsageError("need planes for every scene");
    ChainResult c;
    c.poses.assign(k_count, Pose6::identity());
    c.excluded.assign(k_count, false);
    for (int k = reference - 1; k >= 0; --k) c.poses[k] = compose(pairwise[k], c.poses[k + 1]);
    for (int k = reference + 1; k < k_count; ++k) c.poses[k] = compose(invert(pairwise[k - 1]), c.poses[k - 1]);
    if (!refine) return c;
    std::vector<char> failed(k_count, 0);
    parallel_for(static_cast<size_t>(k_count), threads, [&](size_t k) {
        if (static_cast<int>(k) == reference) return;
        try {
            c.poses[k] = egomotion_pair(planes[reference], planes[k], rig, c.poses[k], opts).pose;
        } catch (const NumericalError&) {
            failed[k] = 1;
        }
    });
    for (int k = 0; k < k_count; ++k) c.excluded[k] = failed[k] != 0;
    return c;
}

DisparityMap fuse_maps(const std::vector<DisparityMap>& maps, const std::vector<Pose6>& poses,
                       const std::vector<bool>& excluded, const RigModel& rig, double d_ref, double cluster_gap) {
    if (maps.empty()) throw UsageError("no scene maps to fuse");
    if (poses.size() != maps.size()) throw UsageError("need one pose per scene map");
    const PoseFrame frame = PoseFrame::of(rig, d_ref);
    std::vector<DisparityMap> conv;
    conv.reserve(maps.size());
    for (const auto& m : maps) conv.push_back(converged_only(m));
    DisparityMap out(maps[0].grid_w, maps[0].grid_h);
    struct Sample {
        double d, w;
    };
    std::vector<Sample> vals;
    for (size_t i = 0; i < out.size(); ++i) {
        const IVec2 ci = out.center_of(i);
        const Vec2 c{double(ci.x), double(ci.y)};
        vals.clear();
        for (size_t k = 0; k < conv.size(); ++k) {
            if (k < excluded.size() && excluded[k]) continue;
            double d = 0.0;
            if (!sample_map(conv[k], c, d)) {
                // The tile may have moved into the scene's field of view from elsewhere.
                const Projection guess = transform_observation(poses[k], frame, c, 1.0);
                if (!guess.valid || !sample_map(conv[k], guess.pixel, d)) continue;
            }
            bool ok = false;
            Vec2 at = c;
            for (int it = 0; it < 4; ++it) {
                const Projection pr = transform_observation(poses[k], frame, c, d);
                double dk = 0.0;
                ok = pr.valid && sample_map(conv[k], pr.pixel, dk);
                if (!ok) break;
                at = pr.pixel;
                d = pr.disparity != 0.0 ? d * dk / pr.disparity : dk;
            }
            if (!ok) continue;
            double w = 0.0;
            interpolate(conv[k], at, [](const TileResult& t) { return t.strength; }, w);
            vals.push_back({d, w});
        }
        if (vals.empty()) continue;
        std::sort(vals.begin(), vals.end(), [](const Sample& x, const Sample& y) { return x.d < y.d; });
        size_t best_lo = 0, best_hi = 0, lo = 0;
        double best_w = -1.0;
        for (size_t j = 1; j <= vals.size(); ++j) {
            if (j == vals.size() || vals[j].d - vals[j - 1].d > cluster_gap) {
                double w = 0.0;
                for (size_t m = lo; m < j; ++m) w += vals[m].w;
                if (w > best_w) {
                    best_w = w;
                    best_lo = lo;
                    best_hi = j;
                }
                lo = j;
            }
        }
        double sum = 0.0, sw = 0.0;
        for (size_t m = best_lo; m < best_hi; ++m) {
            sum += vals[m].d;
            sw += vals[m].w;
        }
        const double n = static_cast<double>(best_hi - best_lo);
        TileResult& t = out.tiles[i];
        t.disparity = sum / n;
        t.strength = sw / n;
        t.status = TileStatus::Converged;
        t.iterations = 0;
        t.last_step = 0.0;
        t.contributions = static_cast<int>(n);
    }
    return fill_gaps(out);
}

DisparityMap accumulate_fd(const std::vector<const std::vector<Image>*>& scenes, const std::vector<Pose6>& poses,
                           const std::vector<bool>& excluded, const RigModel& rig, const std::vector<int>& subset,
                           const DisparityMap& init, const PipelineOptions& opts, int threads) {
    if (poses.size() != scenes.size()) throw UsageError("need one pose per scene");
    std::vector<SceneView> views;
    for (size_t k = 0; k < scenes.size(); ++k) {
        if (k < excluded.size() && excluded[k]) continue;
        if (static_cast<int>(scenes[k]->size()) != rig.n_sensors) throw UsageError("need one image per sensor");
        views.push_back({scenes[k], poses[k]});
    }
    const TileCorrelator tc(rig, subset, opts);
    return build_map(tc, views, rig.width, rig.height, MapInit::from_map(init), threads);
}

SequenceResult process_sequence(const std::vector<std::vector<Image>>& scenes, const RigModel& rig, int reference,
                                const std::vector<int>& subset, const SequenceOptions& opts,
                                const std::vector<Pose6>& known_poses, int threads) {
    const int k_count = static_cast<int>(scenes.size());
    if (k_count == 0) throw UsageError("empty sequence");
    if (reference < 0 || reference >= k_count) throw UsageError("reference scene out of range");
    if (!opts.estimate_poses && static_cast<int>(known_poses.size()) != k_count)
        throw UsageError("need one pose per scene when poses are not estimated");
    SequenceResult r;
    const TileCorrelator tc(rig, subset, opts.pipeline);
    std::vector<DisparityMap> seeds;
    for (const auto& imgs : scenes) {
        seeds.push_back(disparity_sweep(imgs, tc, opts.sweep, threads));
        r.scene_maps.push_back(
            build_map(tc, {SceneView{&imgs, Pose6::identity()}}, rig.width, rig.height, MapInit::from_map(seeds.back()),
                      threads));
    }
    std::vector<const std::vector<Image>*> ptrs;
    for (const auto& s : scenes) ptrs.push_back(&s);
    if (k_count == 1) {
        // One scene: the accumulation starts from the same seed as the single-scene map, so both
        // produce the same result.
        r.poses = {Pose6::identity()};
        r.excluded = {false};
        r.fused = seeds[0];
        r.map = accumulate_fd(ptrs, r.poses, r.excluded, rig, subset, seeds[0], opts.pipeline, threads);
        return r;
    }
    if (opts.estimate_poses) {
        std::vector<ScenePlanes> planes(k_count);
        parallel_for(static_cast<size_t>(k_count), threads, [&](size_t k) {
            planes[k] = make_scene_planes(scenes[k], rig, r.scene_maps[k], opts.plane_scale);
        });
        EgomotionOptions eo = opts.egomotion;
        eo.d_ref = opts.pipeline.d_ref;
        const auto pairwise = pairwise_egomotion(planes, rig, eo, threads);
        ChainResult c = chain_to_reference(pairwise, planes, rig, reference, opts.refine_poses, eo, threads);
        r.poses = std::move(c.poses);
        r.excluded = std::move(c.excluded);
    } else {
        r.poses = known_poses;
        r.excluded.assign(k_count, false);
    }
    r.fused = fuse_maps(r.scene_maps, r.poses, r.excluded, rig, opts.pipeline.d_ref);
    r.map = accumulate_fd(ptrs, r.poses, r.excluded, rig, subset, r.fused, opts.pipeline, threads);
    return r;
}

}  // namespace ringstereo
