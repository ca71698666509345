#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ringstereo/common.hpp"

namespace ringstereo {

// Radial polynomial on normalized coordinates (pixel offset from the principal point divided by
// the focal length): distorted = undistorted * (1 + k1 r^2 + k2 r^4 + k3 r^6).
struct RadialDistortion {
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;

    bool is_identity() const { return k1 == 0.0 && k2 == 0.0 && k3 == 0.0; }
    double factor(double r2) const { return 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3)); }
    bool operator==(const RadialDistortion&) const = default;
};

struct RigModel {
    int n_sensors = 16;
    double radius_m = 0.110;
    double hfov_deg = 32.0;
    int width = 640;
    int height = 512;
    std::vector<Vec2> residual;                // per-sensor pixel offset, empty means zero
    std::vector<RadialDistortion> distortion;  // per-sensor, empty means identity

    static RigModel full_scale() { return {}; }
    static RigModel desk() {
        RigModel r;
        r.width = 160;
        r.height = 128;
        return r;
    }

    void validate() const;
    double focal_px() const;
    Vec2 principal_point() const { return {0.5 * width, 0.5 * height}; }
    // 2*pi*i/N, sensor 0 at the top, clockwise as seen along the view direction.
    double sensor_angle(int i) const;
    // Unit-disparity shift direction (sin a, -cos a), image coordinates x right, y down.
    Vec2 unit_shift(int i) const;
    Vec2 residual_of(int i) const;
    // Physical lens position in the camera frame (meters, x right, y down, z forward).
    Vec3 sensor_position(int i) const;
    // Disparity (pixels) of a point at depth z_m and the inverse relation.
    double disparity_from_depth(double z_m) const { return focal_px() * radius_m / z_m; }
    double depth_from_disparity(double d) const { return focal_px() * radius_m / d; }
    // Average of the per-sensor distortion models, used by the virtual center camera.
    RadialDistortion virtual_distortion() const;
    // Stable text hash of the geometry, recorded in output sidecars.
    std::string hash() const;

    bool operator==(const RigModel&) const = default;
};

std::vector<Vec2> disparity_to_shifts(const RigModel& rig, double d);

struct SplitShift {
    IVec2 integer;
    Vec2 fraction;
};

// Round half away from zero; fraction components lie in [-0.5, 0.5].
SplitShift split_shift(Vec2 shift);

struct PairInfo {
    int i = 0;
    int j = 0;
    Vec2 baseline;          // unit-disparity relative displacement of sensor j versus sensor i
    double length = 0.0;    // |baseline|
    double rotation = 0.0;  // angle that turns the baseline onto +x
    double scale = 0.0;     // length relative to the full-diameter baseline (2)
};

struct PairTable {
    std::vector<int> subset;
    std::vector<PairInfo> pairs;
};

PairTable make_pair_table(const RigModel& rig, const std::vector<int>& subset);

// Every (n_sensors / count)-th sensor starting from sensor 0.
std::vector<int> evenly_spaced_subset(const RigModel& rig, int count);

// Maps a normalized coordinate through the distortion (and back, by fixed-point iteration).
Vec2 distort_normalized(const RadialDistortion& k, Vec2 p);
Vec2 undistort_normalized(const RadialDistortion& k, Vec2 p);

RigModel load_rig(const std::filesystem::path& path);
void save_rig(const std::filesystem::path& path, const RigModel& rig);

}  // namespace ringstereo
