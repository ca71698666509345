#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ringstereo/disparity.hpp"
#include "ringstereo/synth.hpp"

namespace ringstereo {

enum class ReferenceSource { Truth, Measured };
ReferenceSource parse_reference_source(const std::string& s);
std::string to_string(ReferenceSource r);

struct GainOptions {
    double sigma0 = -1.0;  // intrinsic noise; negative means fit it
    int samples = 64;      // matched values per overlap interval
    // Only matched values inside these windows take part; the density ends are flat plateaus
    // whose inversion is ill-conditioned.
    double density_lo = 0.1;
    double density_hi = 0.9;
    double rmse_lo = 0.0;  // fraction of the overlap range skipped at its low end
    double rmse_hi = 1.0;
};

struct BenchConfig {
    RigModel rig = RigModel::desk();
    SceneKind scene = SceneKind::TexturedTerrain;
    double contrast = 1.0;
    SceneParams scene_params;
    uint64_t seed = 1;
    std::vector<int> sensor_counts{2, 4, 8, 16};
    std::vector<double> noise_levels{0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6};
    int instances = 16;  // single-scene noise instances per level
    int scenes = 25;     // K for the accumulated configurations; 0 or 1 disables them
    // Accumulated sequences tolerate far more noise, so their grid is the single-scene grid
    // times this factor.
    double interscene_noise_scale = 4.0;
    bool interscene_all_subsets = true;  // false: only the largest subset gets a K-scene curve
    double intrinsic_noise = 0.0;        // extra noise present in every image, as if from the sensor
    double init_offset = 1.4142;
    int iterations = 10;
    double fat_zero = kDefaultFatZero;
    double settle_step = 0.01;   // last step below this counts as converged
    double diverge_error = 2.0;  // final error above this counts as diverged
    ReferenceSource reference = ReferenceSource::Truth;
    double sensor_netd_mk = 40.0;
    GainOptions gain;
};

struct CurvePoint {
    double noise = 0.0;
    double rmse = 0.0;  // NaN where nothing converged
    double density = 0.0;
    long converged = 0;
    long tiles = 0;
};

struct Curve {
    int sensors = 0;
    int scenes = 1;
    std::vector<CurvePoint> points;

    std::string label() const;
};

struct NoiseSweepResult {
    std::vector<Curve> curves;
    int evaluable_tiles = 0;
    BenchConfig config;

    const Curve* find(int sensors, int scenes) const;
};

// Subset of `count` sensors used by the benchmark (evenly spaced, binocular = opposite pair).
std::vector<int> bench_subset(const RigModel& rig, int count);

// Per-tile reference disparity: truth averaged over the central 8x8 pixels, or the noiseless
// all-sensor map.
DisparityMap reference_map(const SceneModel& scene, const RigModel& rig, ReferenceSource src, const BenchConfig& cfg,
                           int threads = 1);

NoiseSweepResult run_sweep(const BenchConfig& cfg, int threads = 1);

struct GainEntry {
    int sensors_a = 0, scenes_a = 1;  // baseline
    int sensors_b = 0, scenes_b = 1;
    double rmse_gain = 0.0;
    double density_gain = 0.0;
    double gain = 0.0;
    double predicted = 0.0;
    bool defined = false;
    // Matched values and noise ratios behind the averages (for plots).
    std::vector<std::pair<double, double>> rmse_ratios;
    std::vector<std::pair<double, double>> density_ratios;

    std::string label() const;
};

struct NetdRow {
    int scenes = 1;
    std::vector<int> sensors;
    std::vector<double> netd_mk;  // NaN where the gain is undefined
};

struct GainReport {
    std::vector<GainEntry> gains;
    double sigma0 = 0.0;
    bool sigma0_fitted = false;
    std::string warning;
    std::vector<NetdRow> netd;

    const GainEntry* find(int sensors_a, int scenes_a, int sensors_b, int scenes_b) const;
};

// Noise ratio of curve b over curve a at matched RMSE and at matched density, with noise taken
// as sqrt(sigma0^2 + sigma^2).
GainEntry compare_curves(const Curve& a, const Curve& b, double sigma0, const GainOptions& opts);

// Gains of every configuration over single-scene binocular, of each accumulated configuration
// over its single-scene counterpart, and the NETD table.
GainReport gain_ratios(const NoiseSweepResult& result, const GainOptions& opts = {}, double sensor_netd_mk = 40.0);

// Golden-section search over [0, 0.5] for the sigma0 that minimizes the spread of log gains.
// A flat objective returns 0 and sets `warning`.
double fit_intrinsic_noise(const NoiseSweepResult& result, const GainOptions& opts, std::string* warning = nullptr);

double system_netd(double gain, double sensor_netd_mk = 40.0);
// Rounded to 0.1 mK.
double round_netd(double netd_mk);

void write_sweep_csv(const std::filesystem::path& path, const NoiseSweepResult& r);
// Curves only; the config and tile count are not stored in the table.
NoiseSweepResult read_sweep_csv(const std::filesystem::path& path);
void write_netd_csv(const std::filesystem::path& path, const GainReport& g);
void write_gain_report(const std::filesystem::path& path, const GainReport& g, const NoiseSweepResult& r);
void write_curves_svg(const std::filesystem::path& path, const NoiseSweepResult& r);
void write_gains_svg(const std::filesystem::path& path, const GainReport& g);

}  // namespace ringstereo
