#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "ringstereo/evalbench.hpp"
#include "ringstereo/interscene.hpp"
#include "ringstereo/synth.hpp"

namespace ringstereo::cli {

enum class MotionKind { Static, ConstantVelocity, RandomWalk };

struct RunConfig {
    uint64_t seed = 1;
    std::string out = "out";
    std::string input;  // manifest for depth/sequence, results directory for report

    RigModel rig = RigModel::desk();

    SceneKind scene = SceneKind::TexturedTerrain;
    double contrast = 1.0;
    SceneParams scene_params;

    int scenes = 1;  // sequence length K for synth
    MotionKind motion = MotionKind::Static;
    Pose6 velocity;  // per-scene increment for constant-velocity tracks
    double walk_max_t = 0.5;
    double walk_max_r = 0.001;
    NoiseModel noise;

    std::vector<int> subset;  // sensors used by depth/sequence; empty means all
    SweepRange sweep{0.0, 4.0, 1.0};
    PipelineOptions pipeline;
    bool refine_poses = true;
    bool estimate_poses = true;
    int plane_scale = 1;

    BenchConfig bench;
};

// Defaults, then the file (if any), then flags. Unknown keys are usage errors.
RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
void save_config(const std::filesystem::path& path, const RunConfig& c);

// Scene texture, terrain and random tracks derive their streams from the global seed inside the
// library; the noise stream is derived here the same way the benchmark derives it.
uint64_t noise_seed(const RunConfig& c);

// The bench section with the global rig, scene and seed filled in.
BenchConfig resolved_bench(const RunConfig& c);

int cmd_synth(const RunConfig& c, int threads);
int cmd_depth(const RunConfig& c, int threads);
int cmd_sequence(const RunConfig& c, int threads);
int cmd_bench(const RunConfig& c, int threads);
int cmd_report(const RunConfig& c);

// Summary document for a bench output directory; returns the number of failed bands.
int write_report(const std::filesystem::path& results, const std::filesystem::path& out_file);

}  // namespace ringstereo::cli
