#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ringstereo/geometry.hpp"
#include "ringstereo/image.hpp"
#include "ringstereo/phasecorr.hpp"
#include "ringstereo/pose.hpp"
#include "ringstereo/tile_fd.hpp"

namespace ringstereo {

enum class TileStatus : uint8_t { Converged = 0, Diverged = 1, NoData = 2 };
std::string to_string(TileStatus s);

enum class ArgmaxKind { Com, Lma };
ArgmaxKind parse_argmax_kind(const std::string& s);
std::string to_string(ArgmaxKind k);

struct TileResult {
    double disparity = std::numeric_limits<double>::quiet_NaN();
    double strength = 0.0;
    TileStatus status = TileStatus::NoData;
    int iterations = 0;
    double last_step = std::numeric_limits<double>::quiet_NaN();
    int contributions = 0;        // scenes that contributed (1 for single-scene maps)
    bool low_confidence = false;  // value filled from neighbours rather than measured
};

struct DisparityMap {
    int grid_w = 0;
    int grid_h = 0;
    std::vector<TileResult> tiles;

    DisparityMap() = default;
    DisparityMap(int w, int h) : grid_w(w), grid_h(h), tiles(static_cast<size_t>(w) * h) {}
    static DisparityMap for_image(int width, int height);

    TileResult& at(int tx, int ty) { return tiles[static_cast<size_t>(ty) * grid_w + tx]; }
    const TileResult& at(int tx, int ty) const { return tiles[static_cast<size_t>(ty) * grid_w + tx]; }
    size_t size() const { return tiles.size(); }
    // Tile (tx, ty) is centred on virtual-camera pixel (8 (tx + 1), 8 (ty + 1)).
    static IVec2 tile_center(int tx, int ty) { return {kStride * (tx + 1), kStride * (ty + 1)}; }
    IVec2 center_of(size_t index) const {
        return tile_center(static_cast<int>(index % grid_w), static_cast<int>(index / grid_w));
    }
};

// Grid size for an image: ceil(size / 8) - 1 in each direction.
IVec2 grid_dims(int width, int height);

struct PipelineOptions {
    double fat_zero = kDefaultFatZero;
    ArgmaxKind argmax = ArgmaxKind::Com;
    ComOptions com;
    LmaOptions lma;
    FrontEndOptions front;
    int max_iterations = 10;
    double stop_tolerance = 1e-5;       // early exit once a step is this small
    double converged_tolerance = 1e-4;  // final step bound for "converged" after max_iterations
    double divergence_limit = 2.0;      // |d - d0| beyond this aborts as diverged
    double d_ref = 1.5;                 // reference disparity of the pose translation units
    // Ablation: normalize every scene's cross-spectrum before averaging instead of once after.
    bool normalize_per_scene = false;
};

// One scene as seen by the tile correlator: the N sensor images (indexed by sensor) and the
// pose that maps the reference camera frame into this scene's frame.
struct SceneView {
    const std::vector<Image>* images = nullptr;
    Pose6 pose;
};

// Everything a tile needs besides its own center and disparity. Immutable and shared by all
// worker threads.
class TileCorrelator {
public:
    TileCorrelator(const RigModel& rig, const std::vector<int>& subset, const PipelineOptions& opts);

    const RigModel& rig() const { return rig_; }
    const PairTable& table() const { return table_; }
    const PipelineOptions& options() const { return opts_; }
    const Consolidator& consolidator() const { return cons_; }

    struct Outcome {
        bool no_data = false;
        int contributions = 0;
        std::vector<CrossSpectrum> cross;  // per pair, averaged over contributing scenes
    };

    // Accumulates per-pair cross-spectra over the scenes for a reference tile at `center` with
    // reference-frame disparity d. Scenes whose tile leaves the image, or whose integer pre-shifts
    // leave two sensors' windows overlapping by less than a half tile, are skipped.
    Outcome accumulate(const std::vector<SceneView>& scenes, IVec2 center, double d) const;

    // Per-pair pixel-domain surfaces from accumulated cross-spectra (one normalization each).
    std::vector<CorrTile> surfaces(const Outcome& o) const;

    struct Measurement {
        bool ok = false;
        double residual = 0.0;  // disparity correction
        double strength = 0.0;
        CorrTile combined;
    };
    Measurement measure(const Outcome& o) const;

private:
    RigModel rig_;
    PairTable table_;
    PipelineOptions opts_;
    Consolidator cons_;
    PoseFrame frame_;
};

struct RefineTrace {
    std::vector<double> disparities;  // after each iteration
    std::vector<double> steps;
};

TileResult refine_tile(const TileCorrelator& tc, const std::vector<SceneView>& scenes, IVec2 center, double d0,
                       RefineTrace* trace = nullptr);

// Convenience single-scene form.
TileResult refine_tile(const std::vector<Image>& images, const TileCorrelator& tc, IVec2 center, double d0,
                       RefineTrace* trace = nullptr);

struct MapInit {
    std::optional<DisparityMap> map;
    double constant = 0.0;
    double offset = 0.0;  // added to every initial value

    static MapInit from_constant(double d) { return {std::nullopt, d, 0.0}; }
    static MapInit from_map(DisparityMap m, double offset = 0.0) { return {std::move(m), 0.0, offset}; }
};

DisparityMap build_map(const TileCorrelator& tc, const std::vector<SceneView>& scenes, int width, int height,
                       const MapInit& init, int threads = 1);
DisparityMap build_map(const std::vector<Image>& images, const RigModel& rig, const std::vector<int>& subset,
                       const MapInit& init, const PipelineOptions& opts = {}, int threads = 1);

struct SweepRange {
    double lo = 0.0;
    double hi = 4.0;
    double step = 1.0;
};

// Seeds every tile with the candidate pre-shift whose combined correlation has the highest
// peak; ties go to the smaller disparity. Seeded tiles report status converged with zero
// iterations. A tile whose best candidate borders one that left the image stays no-data.
DisparityMap disparity_sweep(const std::vector<Image>& images, const TileCorrelator& tc, const SweepRange& range,
                             int threads = 1);

// Binary planes: <stem>.disp.f32 (disparity plane then strength plane, little-endian float32),
// <stem>.status.u8, optional <stem>.contrib.u16, and a text sidecar <stem>.txt.
void save_map(const std::filesystem::path& stem, const DisparityMap& map, const std::string& rig_hash,
              const std::vector<std::pair<std::string, std::string>>& params, bool with_contributions = false);
DisparityMap load_map(const std::filesystem::path& stem);
void export_csv(const std::filesystem::path& path, const DisparityMap& map);

}  // namespace ringstereo
