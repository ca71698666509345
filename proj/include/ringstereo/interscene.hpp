#pragma once

#include <vector>

#include "ringstereo/disparity.hpp"
#include "ringstereo/pose.hpp"

namespace ringstereo {

// Bilinear interpolation of a tile map at a virtual-camera pixel. Only tiles with a disparity
// take part; returns false if none of the four surrounding tiles has one.
bool sample_map(const DisparityMap& map, Vec2 pixel, double& d);

// Fills tiles without data from the nearest tile with data (grid distance, lowest index on ties)
// and flags them low-confidence.
DisparityMap fill_gaps(const DisparityMap& map);

// Average of the sensor images resampled to the virtual camera with a dense per-pixel
// disparity interpolated from the map (gaps filled first).
Image virtual_image(const std::vector<Image>& images, const RigModel& rig, const DisparityMap& map);

// Per-scene data used for egomotion: the single-scene map and the high-pass filtered virtual
// image, optionally down-scaled. At desk resolution a 2x plane leaves too few tiles for
// 0.02 px poses, so the default keeps full resolution.
struct ScenePlanes {
    DisparityMap map;
    Image highpass;
    int scale = 1;
};

ScenePlanes make_scene_planes(const std::vector<Image>& images, const RigModel& rig, const DisparityMap& map,
                              int scale = 1, double prefilter = 1.0);

struct EgomotionOptions {
    int max_iterations = 20;
    double rel_tolerance = 1e-6;
    int min_tiles = 10;
    double max_offset = 2.0;  // per-tile correlation offsets beyond this (pixels) are discarded
    double fat_zero = kDefaultFatZero;
    double d_ref = 1.5;
    bool use_disparity = true;  // also fit the disparity change predicted by the pose
    // Cauchy weights with scale robust_scale * median tile offset; 0 disables.
    double robust_scale = 3.0;
};

struct EgomotionResult {
    Pose6 pose;
    int tiles = 0;
    int iterations = 0;
    double rms = 0.0;  // weighted RMS of the final offset residuals (pixels)
};

// Pose mapping scene a's camera frame into scene b's frame. Throws NumericalError
// "insufficient texture for egomotion" when fewer than min_tiles tiles can be measured.
EgomotionResult egomotion_pair(const ScenePlanes& a, const ScenePlanes& b, const RigModel& rig, const Pose6& init,
                               const EgomotionOptions& opts = {});

// pairwise[k] maps scene k+1's frame into scene k's frame.
std::vector<Pose6> pairwise_egomotion(const std::vector<ScenePlanes>& planes, const RigModel& rig,
                                      const EgomotionOptions& opts = {}, int threads = 1);

struct ChainResult {
    std::vector<Pose6> poses;  // pose k maps the reference frame into scene k's frame
    std::vector<bool> excluded;
};

// Composes the pairwise poses outward from the reference. With refine, every scene is then
// re-fitted directly against the reference starting from the composed pose; scenes whose fit
// fails keep the composed pose and are marked excluded.
ChainResult chain_to_reference(const std::vector<Pose6>& pairwise, const std::vector<ScenePlanes>& planes,
                               const RigModel& rig, int reference, bool refine, const EgomotionOptions& opts = {},
                               int threads = 1);

// Dense reference-frame initialization from per-scene maps: reprojected values are clustered
// with gaps above cluster_gap, the strongest cluster is averaged and empty tiles are filled.
DisparityMap fuse_maps(const std::vector<DisparityMap>& maps, const std::vector<Pose6>& poses,
                       const std::vector<bool>& excluded, const RigModel& rig, double d_ref = 1.5,
                       double cluster_gap = 1.0);

// Refines the reference map on cross-spectra averaged over every scene that sees each tile.
DisparityMap accumulate_fd(const std::vector<const std::vector<Image>*>& scenes, const std::vector<Pose6>& poses,
                           const std::vector<bool>& excluded, const RigModel& rig, const std::vector<int>& subset,
                           const DisparityMap& init, const PipelineOptions& opts = {}, int threads = 1);

struct SequenceOptions {
    PipelineOptions pipeline;
    EgomotionOptions egomotion;
    SweepRange sweep{0.0, 4.0, 1.0};
    int plane_scale = 1;
    bool refine_poses = true;
    bool estimate_poses = true;  // false: use the supplied poses as they are
};

struct SequenceResult {
    std::vector<DisparityMap> scene_maps;
    std::vector<Pose6> poses;
    std::vector<bool> excluded;
    DisparityMap fused;
    DisparityMap map;
};

// Whole interscene flow for scenes[k][sensor]: single-scene maps (sweep + refinement),
// egomotion and chaining, fusion, then frequency-domain accumulation.
SequenceResult process_sequence(const std::vector<std::vector<Image>>& scenes, const RigModel& rig, int reference,
                                const std::vector<int>& subset, const SequenceOptions& opts,
                                const std::vector<Pose6>& known_poses = {}, int threads = 1);

}  // namespace ringstereo
