#include "run_config.hpp"

#include <fstream>
#include <set>

#include "ringstereo/rng.hpp"

namespace ringstereo::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
    if (!j.is_object()) throw UsageError("config section '" + section + "' must be an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw UsageError("unknown config key '" + section + (section.empty() ? "" : ".") + k + "'");
}

template <class T>
void get(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

std::string motion_name(MotionKind m) {
    switch (m) {
        case MotionKind::Static: return "static";
        case MotionKind::ConstantVelocity: return "constant";
        case MotionKind::RandomWalk: return "random";
    }
    return "?";
}

MotionKind parse_motion(const std::string& s) {
    if (s == "static") return MotionKind::Static;
    if (s == "constant") return MotionKind::ConstantVelocity;
    if (s == "random") return MotionKind::RandomWalk;
    throw UsageError("unknown motion '" + s + "' (expected static, constant or random)");
}

json pose_to(const Pose6& p) { return {{"t", {p.t.x, p.t.y, p.t.z}}, {"r", {p.r.x, p.r.y, p.r.z}}}; }

Pose6 pose_from(const json& j) {
    check_keys(j, {"t", "r"}, "velocity");
    Pose6 p;
    if (j.contains("t")) p.t = {j["t"].at(0), j["t"].at(1), j["t"].at(2)};
    if (j.contains("r")) p.r = {j["r"].at(0), j["r"].at(1), j["r"].at(2)};
    return p;
}

void read_rig(const json& j, RigModel& r) {
    check_keys(j, {"file", "n_sensors", "radius_m", "hfov_deg", "image_width", "image_height", "residuals"}, "rig");
    if (j.contains("file")) r = load_rig(j["file"].get<std::string>());
    get(j, "n_sensors", r.n_sensors);
    get(j, "radius_m", r.radius_m);
    get(j, "hfov_deg", r.hfov_deg);
    get(j, "image_width", r.width);
    get(j, "image_height", r.height);
    if (j.contains("residuals")) {
        r.residual.clear();
        for (const auto& e : j["residuals"]) r.residual.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    }
}

json rig_to(const RigModel& r) {
    json j{{"n_sensors", r.n_sensors}, {"radius_m", r.radius_m},     {"hfov_deg", r.hfov_deg},
           {"image_width", r.width},   {"image_height", r.height}};
    if (!r.residual.empty()) {
        j["residuals"] = json::array();
        for (const auto& v : r.residual) j["residuals"].push_back({v.x, v.y});
    }
    if (!r.distortion.empty()) throw UsageError("rigs with distortion cannot be embedded in a run config");
    return j;
}

void read_pipeline(const json& j, PipelineOptions& p) {
    check_keys(j, {"argmax", "fat_zero", "max_iterations", "stop_tolerance", "converged_tolerance", "divergence_limit",
                   "d_ref", "normalize_per_scene", "com_radius", "com_iterations"},
               "pipeline");
    if (j.contains("argmax")) p.argmax = parse_argmax_kind(j["argmax"].get<std::string>());
    get(j, "fat_zero", p.fat_zero);
    get(j, "max_iterations", p.max_iterations);
    get(j, "stop_tolerance", p.stop_tolerance);
    get(j, "converged_tolerance", p.converged_tolerance);
    get(j, "divergence_limit", p.divergence_limit);
    get(j, "d_ref", p.d_ref);
    get(j, "normalize_per_scene", p.normalize_per_scene);
    get(j, "com_radius", p.com.radius);
    get(j, "com_iterations", p.com.iterations);
}

json pipeline_to(const PipelineOptions& p) {
    return {{"argmax", to_string(p.argmax)},
            {"fat_zero", p.fat_zero},
            {"max_iterations", p.max_iterations},
            {"stop_tolerance", p.stop_tolerance},
            {"converged_tolerance", p.converged_tolerance},
            {"divergence_limit", p.divergence_limit},
            {"d_ref", p.d_ref},
            {"normalize_per_scene", p.normalize_per_scene},
            {"com_radius", p.com.radius},
            {"com_iterations", p.com.iterations}};
}

void read_bench(const json& j, BenchConfig& b) {
    check_keys(j, {"sensor_counts", "noise_levels", "instances", "scenes", "interscene_noise_scale",
                   "interscene_all_subsets", "intrinsic_noise", "init_offset", "iterations", "fat_zero", "settle_step",
                   "diverge_error", "reference", "sensor_netd_mk", "gain"},
               "bench");
    get(j, "sensor_counts", b.sensor_counts);
    get(j, "noise_levels", b.noise_levels);
    get(j, "instances", b.instances);
    get(j, "scenes", b.scenes);
    get(j, "interscene_noise_scale", b.interscene_noise_scale);
    get(j, "interscene_all_subsets", b.interscene_all_subsets);
    get(j, "intrinsic_noise", b.intrinsic_noise);
    get(j, "init_offset", b.init_offset);
    get(j, "iterations", b.iterations);
    get(j, "fat_zero", b.fat_zero);
    get(j, "settle_step", b.settle_step);
    get(j, "diverge_error", b.diverge_error);
    if (j.contains("reference")) b.reference = parse_reference_source(j["reference"].get<std::string>());
    get(j, "sensor_netd_mk", b.sensor_netd_mk);
    if (j.contains("gain")) {
        const json& g = j["gain"];
        check_keys(g, {"sigma0", "samples", "density_lo", "density_hi", "rmse_lo", "rmse_hi"}, "bench.gain");
        get(g, "sigma0", b.gain.sigma0);
        get(g, "samples", b.gain.samples);
        get(g, "density_lo", b.gain.density_lo);
        get(g, "density_hi", b.gain.density_hi);
        get(g, "rmse_lo", b.gain.rmse_lo);
        get(g, "rmse_hi", b.gain.rmse_hi);
    }
}

json bench_to(const BenchConfig& b) {
    return {{"sensor_counts", b.sensor_counts},
            {"noise_levels", b.noise_levels},
            {"instances", b.instances},
            {"scenes", b.scenes},
            {"interscene_noise_scale", b.interscene_noise_scale},
            {"interscene_all_subsets", b.interscene_all_subsets},
            {"intrinsic_noise", b.intrinsic_noise},
            {"init_offset", b.init_offset},
            {"iterations", b.iterations},
            {"fat_zero", b.fat_zero},
            {"settle_step", b.settle_step},
            {"diverge_error", b.diverge_error},
            {"reference", to_string(b.reference)},
            {"sensor_netd_mk", b.sensor_netd_mk},
            {"gain",
             {{"sigma0", b.gain.sigma0},
              {"samples", b.gain.samples},
              {"density_lo", b.gain.density_lo},
              {"density_hi", b.gain.density_hi},
              {"rmse_lo", b.gain.rmse_lo},
              {"rmse_hi", b.gain.rmse_hi}}}};
}

}  // namespace

RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        check_keys(j, {"seed", "out", "input", "rig", "scene", "sequence", "noise", "depth", "pipeline", "bench"}, "");
        get(j, "seed", c.seed);
        get(j, "out", c.out);
        get(j, "input", c.input);
        if (j.contains("rig")) read_rig(j["rig"], c.rig);
        if (j.contains("scene")) {
            const json& s = j["scene"];
            check_keys(s, {"kind", "contrast", "texture_sigma", "terrain_sigma", "terrain_min", "terrain_max", "ramp_max",
                           "steps"},
                       "scene");
            if (s.contains("kind")) c.scene = parse_scene_kind(s["kind"].get<std::string>());
            get(s, "contrast", c.contrast);
            get(s, "texture_sigma", c.scene_params.texture_sigma);
            get(s, "terrain_sigma", c.scene_params.terrain_sigma);
            get(s, "terrain_min", c.scene_params.terrain_min);
            get(s, "terrain_max", c.scene_params.terrain_max);
            get(s, "ramp_max", c.scene_params.ramp_max);
            get(s, "steps", c.scene_params.steps);
        }
        if (j.contains("sequence")) {
            const json& s = j["sequence"];
            check_keys(s, {"scenes", "motion", "velocity", "walk_max_t", "walk_max_r", "refine_poses", "estimate_poses",
                           "plane_scale"},
                       "sequence");
            get(s, "scenes", c.scenes);
            if (s.contains("motion")) c.motion = parse_motion(s["motion"].get<std::string>());
            if (s.contains("velocity")) c.velocity = pose_from(s["velocity"]);
            get(s, "walk_max_t", c.walk_max_t);
            get(s, "walk_max_r", c.walk_max_r);
            get(s, "refine_poses", c.refine_poses);
            get(s, "estimate_poses", c.estimate_poses);
            get(s, "plane_scale", c.plane_scale);
        }
        if (j.contains("noise")) {
            const json& s = j["noise"];
            check_keys(s, {"amplitude", "sensor_netd_mk"}, "noise");
            get(s, "amplitude", c.noise.amplitude);
            get(s, "sensor_netd_mk", c.noise.sensor_netd_mk);
        }
        if (j.contains("depth")) {
            const json& s = j["depth"];
            check_keys(s, {"subset", "sweep"}, "depth");
            get(s, "subset", c.subset);
            if (s.contains("sweep")) {
                const json& w = s["sweep"];
                check_keys(w, {"lo", "hi", "step"}, "depth.sweep");
                get(w, "lo", c.sweep.lo);
                get(w, "hi", c.sweep.hi);
                get(w, "step", c.sweep.step);
            }
        }
        if (j.contains("pipeline")) read_pipeline(j["pipeline"], c.pipeline);
        if (j.contains("bench")) read_bench(j["bench"], c.bench);
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    if (c.scenes < 1) throw UsageError("sequence.scenes must be at least 1");
    for (int s : c.subset)
        if (s < 0 || s >= c.rig.n_sensors) throw UsageError("depth.subset lists a sensor outside the rig");
    c.rig.validate();
    return c;
}

json config_to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["out"] = c.out;
    j["input"] = c.input;
    j["rig"] = rig_to(c.rig);
    j["scene"] = {{"kind", to_string(c.scene)},
                  {"contrast", c.contrast},
                  {"texture_sigma", c.scene_params.texture_sigma},
                  {"terrain_sigma", c.scene_params.terrain_sigma},
                  {"terrain_min", c.scene_params.terrain_min},
                  {"terrain_max", c.scene_params.terrain_max},
                  {"ramp_max", c.scene_params.ramp_max},
                  {"steps", c.scene_params.steps}};
    j["sequence"] = {{"scenes", c.scenes},
                     {"motion", motion_name(c.motion)},
                     {"velocity", pose_to(c.velocity)},
                     {"walk_max_t", c.walk_max_t},
                     {"walk_max_r", c.walk_max_r},
                     {"refine_poses", c.refine_poses},
                     {"estimate_poses", c.estimate_poses},
                     {"plane_scale", c.plane_scale}};
    j["noise"] = {{"amplitude", c.noise.amplitude}, {"sensor_netd_mk", c.noise.sensor_netd_mk}};
    j["depth"] = {{"subset", c.subset}, {"sweep", {{"lo", c.sweep.lo}, {"hi", c.sweep.hi}, {"step", c.sweep.step}}}};
    j["pipeline"] = pipeline_to(c.pipeline);
    j["bench"] = bench_to(c.bench);
    return j;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UsageError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const RunConfig& c) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << config_to_json(c).dump(2) << "\n";
}

uint64_t noise_seed(const RunConfig& c) { return derive_seed(c.seed, {tag(Stream::Noise)}); }

BenchConfig resolved_bench(const RunConfig& c) {
    BenchConfig b = c.bench;
    b.rig = c.rig;
    b.scene = c.scene;
    b.contrast = c.contrast;
    b.scene_params = c.scene_params;
    b.seed = c.seed;
    return b;
}

}  // namespace ringstereo::cli
