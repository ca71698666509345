#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ringstereo/geometry.hpp"
#include "ringstereo/image.hpp"
#include "ringstereo/pose.hpp"

namespace ringstereo {

enum class SceneKind { FlatRamp, FrontoSteps, TexturedTerrain };

SceneKind parse_scene_kind(const std::string& s);
std::string to_string(SceneKind k);

struct SceneParams {
    double texture_sigma = 0.8;   // low-pass applied to the white-noise texture (pixels)
    double terrain_sigma = 20.0;  // smoothness of the terrain disparity field (pixels)
    double terrain_min = 0.5;
    double terrain_max = 2.5;
    double ramp_max = 3.0;
    std::vector<double> steps{0.5, 1.5, 2.5};  // fronto-steps plateaus, left to right
    // The texture is synthesized on a grid this many times finer than the sensor pixels and
    // the renderer interpolates on that grid, so interpolation error stays far below 0.01 px.
    int oversample = 4;
};

// texture: radiometric values in relative units; truth: disparity (pixels) in the reference
// virtual camera. Both share the virtual-camera pixel grid.
struct SceneModel {
    SceneKind kind = SceneKind::TexturedTerrain;
    Image texture;     // texture sampled at the virtual-camera pixels
    Image texture_hr;  // fine-grid texture; pixel (x, y) sits at (x, y) * oversample
    int oversample = 1;
    Image truth;
    double contrast = 1.0;
    uint64_t seed = 0;
};

// The texture spans `contrast` around 0.5.
SceneModel make_scene(SceneKind kind, int width, int height, double contrast, uint64_t seed,
                      const SceneParams& params = {});

struct RenderedViews {
    std::vector<Image> images;  // one per sensor
    std::vector<Image> valid;   // 1 where the sample came from inside the scene, else 0
};

struct RenderOptions {
    double d_ref = 1.5;
    int solver_iterations = 8;
    double max_motion = 8.0;  // half a tile
};

// Backward rendering: each sensor pixel s finds the reference point q with
// pose(q) + d'(q) * u_i + residual_i = s and samples the texture there (Catmull-Rom).
RenderedViews render_views(const SceneModel& scene, const RigModel& rig, const Pose6& pose,
                           const RenderOptions& opts = {});

struct NoiseModel {
    double amplitude = 0.0;  // standard deviation in relative units
    double sensor_netd_mk = 40.0;
    uint64_t seed = 0;
};

// Unit-variance white Gaussian field for (seed, sensor, scene).
Image noise_field(uint64_t seed, int sensor, int scene, int width, int height);

// images[s] is sensor `sensors[s]` (all sensors in order when `sensors` is empty).
void add_noise(std::vector<Image>& images, const NoiseModel& noise, int scene_index,
               const std::vector<int>& sensors = {});

struct MotionTrack {
    std::vector<Pose6> poses;  // pose k maps the reference camera frame to scene k's frame
    int reference = 0;

    size_t size() const { return poses.size(); }
};

MotionTrack static_track(int scenes);
// Scene k sits (k - reference) steps of `velocity` away from the reference.
MotionTrack constant_velocity_track(int scenes, const Pose6& velocity);
// Independent random per-scene increments bounded by max_t (pixels) and max_r (radians).
MotionTrack random_walk_track(int scenes, double max_t, double max_r, uint64_t seed);

struct SceneSet {
    std::vector<Image> images;
    std::vector<Image> valid;
    Pose6 truth_pose;
};

struct SyntheticSequence {
    RigModel rig;
    SceneModel scene;
    MotionTrack track;
    NoiseModel noise;
    RenderOptions render;
    std::vector<SceneSet> scenes;

    int reference() const { return track.reference; }
};

SyntheticSequence render_sequence(const SceneModel& scene, const RigModel& rig, const MotionTrack& track,
                                  const NoiseModel& noise, const RenderOptions& opts = {}, int threads = 1);

// On-disk sequence: 16-bit PGM per sensor and scene, PFM truth, JSON manifest.
struct LoadedSequence {
    RigModel rig;
    std::vector<std::vector<Image>> images;  // [scene][sensor]
    std::vector<Pose6> poses;
    int reference = 0;
    double d_ref = 1.5;
    Image truth;
    Image texture;
    NoiseModel noise;
};

std::filesystem::path write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq);
LoadedSequence load_sequence(const std::filesystem::path& manifest);

}  // namespace ringstereo
