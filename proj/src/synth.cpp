#include "ringstereo/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "ringstereo/parallel.hpp"
#include "ringstereo/rng.hpp"

namespace ringstereo {

SceneKind parse_scene_kind(const std::string& s) {
    if (s == "flat-ramp") return SceneKind::FlatRamp;
    if (s == "fronto-steps") return SceneKind::FrontoSteps;
    if (s == "textured-terrain") return SceneKind::TexturedTerrain;
    throw UsageError("unknown scene kind '" + s + "'");
}

std::string to_string(SceneKind k) {
    switch (k) {
        case SceneKind::FlatRamp: return "flat-ramp";
        case SceneKind::FrontoSteps: return "fronto-steps";
        case SceneKind::TexturedTerrain: return "textured-terrain";
    }
    return "?";
}

namespace {

Image white_noise(int w, int h, uint64_t seed) {
    Rng rng(seed);
    Image img(w, h);
    for (auto& v : img.px) v = rng.normal();
    return img;
}

// Affine map of the image so that its range becomes [lo, hi].
void rescale(Image& img, double lo, double hi) {
    const auto [mn, mx] = std::minmax_element(img.px.begin(), img.px.end());
    const double a = *mn, b = *mx;
    const double span = b > a ? b - a : 1.0;
    for (auto& v : img.px) v = lo + (hi - lo) * (v - a) / span;
}

}  // namespace

SceneModel make_scene(SceneKind kind, int width, int height, double contrast, uint64_t seed, const SceneParams& p) {
    if (width < 64 || height < 64) throw UsageError("scene size must be at least 64x64");
    if (!(contrast > 0.0 && contrast <= 1.0)) throw UsageError("contrast must be in (0, 1]");
    SceneModel s;
    s.kind = kind;
    s.contrast = contrast;
    s.seed = seed;
    if (p.oversample < 1) throw UsageError("oversample must be at least 1");
    const int os = p.oversample;
    s.oversample = os;
    s.texture_hr = gaussian_blur_wrap(white_noise(width * os, height * os, derive_seed(seed, {tag(Stream::Texture)})),
                                      p.texture_sigma * os);
    rescale(s.texture_hr, 0.5 - 0.5 * contrast, 0.5 + 0.5 * contrast);
    s.texture = Image(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) s.texture.at(x, y) = s.texture_hr.at(x * os, y * os);
    s.truth = Image(width, height);
    switch (kind) {
        case SceneKind::FlatRamp:
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x) s.truth.at(x, y) = p.ramp_max * y / (height - 1);
            break;
        case SceneKind::FrontoSteps: {
            const int n = static_cast<int>(p.steps.size());
            if (n < 2) throw UsageError("fronto-steps needs at least two plateaus");
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x) s.truth.at(x, y) = p.steps[std::min(n - 1, x * n / width)];
            break;
        }
        case SceneKind::TexturedTerrain:
            s.truth = gaussian_blur_wrap(white_noise(width, height, derive_seed(seed, {tag(Stream::Terrain)})),
                                         p.terrain_sigma);
            rescale(s.truth, p.terrain_min, p.terrain_max);
            break;
    }
    return s;
}

RenderedViews render_views(const SceneModel& scene, const RigModel& rig, const Pose6& pose, const RenderOptions& opts) {
    rig.validate();
    const int w = scene.texture.width, h = scene.texture.height;
    if (w != rig.width || h != rig.height) throw UsageError("scene size does not match the rig image size");
    const PoseFrame frame = PoseFrame::of(rig, opts.d_ref);
    const bool still = pose.is_identity();

    // Per reference pixel: where it lands in this scene's virtual camera and its disparity there.
    Image mx(w, h), my(w, h), md(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double d = scene.truth.at(x, y);
            const Projection pr = transform_observation(pose, frame, {double(x), double(y)}, d);
            if (!pr.valid) throw DataError("pose moves the scene behind the camera");
            const double dx = pr.pixel.x - x, dy = pr.pixel.y - y;
            if (std::hypot(dx, dy) > opts.max_motion) throw DataError("motion exceeds tile overlap");
            mx.at(x, y) = dx;
            my.at(x, y) = dy;
            md.at(x, y) = pr.disparity;
        }

    const double fill = scene.texture.mean();
    const Image& hr = scene.texture_hr.empty() ? scene.texture : scene.texture_hr;
    const int os = scene.texture_hr.empty() ? 1 : scene.oversample;
    RenderedViews out;
    out.images.assign(static_cast<size_t>(rig.n_sensors), Image(w, h));
    out.valid.assign(static_cast<size_t>(rig.n_sensors), Image(w, h));
    for (int i = 0; i < rig.n_sensors; ++i) {
        const Vec2 u = rig.unit_shift(i), res = rig.residual_of(i);
        Image& img = out.images[i];
        Image& val = out.valid[i];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double qx = x, qy = y;
                for (int it = 0; it < opts.solver_iterations; ++it) {
                    double fx, fy;
                    if (still) {
                        const double d = sample_bilinear(scene.truth, qx, qy);
                        fx = qx + d * u.x + res.x;
                        fy = qy + d * u.y + res.y;
                    } else {
                        const double d = sample_bilinear(md, qx, qy);
                        fx = qx + sample_bilinear(mx, qx, qy) + d * u.x + res.x;
                        fy = qy + sample_bilinear(my, qx, qy) + d * u.y + res.y;
                    }
                    qx += x - fx;
                    qy += y - fy;
                }
                const bool inside = qx >= 0 && qy >= 0 && qx <= w - 1 && qy <= h - 1;
                img.at(x, y) = inside ? sample_catmull_rom(hr, qx * os, qy * os) : fill;
                val.at(x, y) = inside ? 1.0 : 0.0;
            }
    }
    return out;
}

Image noise_field(uint64_t seed, int sensor, int scene, int width, int height) {
    Rng rng(derive_seed(seed, {tag(Stream::Noise), static_cast<uint64_t>(sensor), static_cast<uint64_t>(scene)}));
    Image img(width, height);
    for (auto& v : img.px) v = rng.normal();
    return img;
}

void add_noise(std::vector<Image>& images, const NoiseModel& noise, int scene_index, const std::vector<int>& sensors) {
    if (noise.amplitude < 0) throw UsageError("noise amplitude must be non-negative");
    if (noise.amplitude == 0.0) return;
    if (!sensors.empty() && sensors.size() != images.size()) throw UsageError("sensor list does not match images");
    for (size_t k = 0; k < images.size(); ++k) {
        const int sensor = sensors.empty() ? static_cast<int>(k) : sensors[k];
        Image& img = images[k];
        const Image n = noise_field(noise.seed, sensor, scene_index, img.width, img.height);
        for (size_t p = 0; p < img.px.size(); ++p) img.px[p] += noise.amplitude * n.px[p];
    }
}

MotionTrack static_track(int scenes) {
    if (scenes < 1) throw UsageError("track needs at least one scene");
    MotionTrack t;
    t.poses.assign(static_cast<size_t>(scenes), Pose6::identity());
    t.reference = scenes - 1;
    return t;
}

MotionTrack constant_velocity_track(int scenes, const Pose6& v) {
    MotionTrack t = static_track(scenes);
    for (int k = 0; k < scenes; ++k) {
        const double s = k - t.reference;
        if (s == 0) continue;
        t.poses[k] = {{v.t.x * s, v.t.y * s, v.t.z * s}, {v.r.x * s, v.r.y * s, v.r.z * s}};
    }
    return t;
}

MotionTrack random_walk_track(int scenes, double max_t, double max_r, uint64_t seed) {
    MotionTrack t = static_track(scenes);
    Rng rng(derive_seed(seed, {tag(Stream::Track)}));
    auto u = [&](double m) { return m * (2.0 * rng.uniform() - 1.0); };
    // Walk backward from the reference: step k maps frame k+1 to frame k.
    for (int k = t.reference - 1; k >= 0; --k) {
        const Pose6 step{{u(max_t), u(max_t), u(max_t)}, {u(max_r), u(max_r), u(max_r)}};
        t.poses[k] = compose(step, t.poses[k + 1]);
    }
    return t;
}

SyntheticSequence render_sequence(const SceneModel& scene, const RigModel& rig, const MotionTrack& track,
                                  const NoiseModel& noise, const RenderOptions& opts, int threads) {
    SyntheticSequence seq;
    seq.rig = rig;
    seq.scene = scene;
    seq.track = track;
    seq.noise = noise;
    seq.render = opts;
    seq.scenes.resize(track.size());
    parallel_for(track.size(), threads, [&](size_t k) {
        RenderedViews v = render_views(scene, rig, track.poses[k], opts);
        add_noise(v.images, noise, static_cast<int>(k));
        seq.scenes[k] = {std::move(v.images), std::move(v.valid), track.poses[k]};
    });
    return seq;
}

namespace {

nlohmann::json pose_json(const Pose6& p) {
    return {{"t", {p.t.x, p.t.y, p.t.z}}, {"r", {p.r.x, p.r.y, p.r.z}}};
}

Pose6 pose_from_json(const nlohmann::json& j) {
    Pose6 p;
    p.t = {j.at("t").at(0).get<double>(), j.at("t").at(1).get<double>(), j.at("t").at(2).get<double>()};
    p.r = {j.at("r").at(0).get<double>(), j.at("r").at(1).get<double>(), j.at("r").at(2).get<double>()};
    return p;
}

}  // namespace

std::filesystem::path write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq) {
    std::filesystem::create_directories(dir);
    nlohmann::json m;
    m["format"] = "ringstereo-sequence 1";
    m["rig"] = {{"n_sensors", seq.rig.n_sensors}, {"radius_m", seq.rig.radius_m}, {"hfov_deg", seq.rig.hfov_deg},
                {"image_width", seq.rig.width}, {"image_height", seq.rig.height}};
    if (!seq.rig.residual.empty()) {
        m["rig"]["residuals"] = nlohmann::json::array();
        for (const auto& r : seq.rig.residual) m["rig"]["residuals"].push_back({r.x, r.y});
    }
    m["reference"] = seq.reference();
    m["d_ref"] = seq.render.d_ref;
    m["scene"] = {{"kind", to_string(seq.scene.kind)}, {"contrast", seq.scene.contrast}, {"seed", seq.scene.seed}};
    m["noise"] = {{"amplitude", seq.noise.amplitude}, {"seed", seq.noise.seed}, {"sensor_netd_mk", seq.noise.sensor_netd_mk},
                  {"units", "fraction of the full 16-bit range; texture spans `contrast` around 0.5"}};
    write_pfm(dir / "truth.pfm", seq.scene.truth);
    write_pgm16(dir / "texture.pgm", seq.scene.texture);
    m["truth"] = "truth.pfm";
    m["texture"] = "texture.pgm";
    m["scenes"] = nlohmann::json::array();
    for (size_t k = 0; k < seq.scenes.size(); ++k) {
        nlohmann::json sj;
        sj["index"] = k;
        sj["pose"] = pose_json(seq.scenes[k].truth_pose);
        sj["noise_stream"] = {seq.noise.seed, "noise", "sensor", k};
        sj["images"] = nlohmann::json::array();
        for (size_t i = 0; i < seq.scenes[k].images.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "scene%03zu_sensor%02zu.pgm", k, i);
            write_pgm16(dir / name, seq.scenes[k].images[i]);
            sj["images"].push_back(name);
        }
        m["scenes"].push_back(sj);
    }
    const auto path = dir / "manifest.json";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << m.dump(2) << "\n";
    return path;
}

LoadedSequence load_sequence(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot read manifest " + manifest.string());
    nlohmann::json m;
    try {
        in >> m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + manifest.string() + ": " + e.what());
    }
    const auto dir = manifest.parent_path();
    LoadedSequence s;
    try {
        const auto& r = m.at("rig");
        s.rig.n_sensors = r.at("n_sensors");
        s.rig.radius_m = r.at("radius_m");
        s.rig.hfov_deg = r.at("hfov_deg");
        s.rig.width = r.at("image_width");
        s.rig.height = r.at("image_height");
        if (r.contains("residuals"))
            for (const auto& e : r["residuals"]) s.rig.residual.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
        s.reference = m.at("reference");
        s.d_ref = m.value("d_ref", 1.5);
        if (m.contains("noise")) {
            s.noise.amplitude = m["noise"].value("amplitude", 0.0);
            s.noise.seed = m["noise"].value("seed", uint64_t{0});
            s.noise.sensor_netd_mk = m["noise"].value("sensor_netd_mk", 40.0);
        }
        if (m.contains("truth")) s.truth = read_pfm(dir / m["truth"].get<std::string>());
        if (m.contains("texture")) s.texture = read_pgm16(dir / m["texture"].get<std::string>());
        for (const auto& sj : m.at("scenes")) {
            s.poses.push_back(sj.contains("pose") ? pose_from_json(sj["pose"]) : Pose6::identity());
            std::vector<Image> imgs;
            for (const auto& name : sj.at("images")) imgs.push_back(read_pgm16(dir / name.get<std::string>()));
            if (static_cast<int>(imgs.size()) != s.rig.n_sensors) throw DataError("scene image count does not match the rig");
            s.images.push_back(std::move(imgs));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + manifest.string() + ": " + e.what());
    }
    s.rig.validate();
    if (s.images.empty()) throw DataError("manifest lists no scenes");
    if (s.reference < 0 || s.reference >= static_cast<int>(s.images.size())) throw DataError("reference index out of range");
    return s;
}

}  // namespace ringstereo
