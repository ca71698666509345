#pragma once

#include <array>

#include "ringstereo/common.hpp"
#include "ringstereo/geometry.hpp"

namespace ringstereo {

using Mat3 = std::array<double, 9>;  // row-major

// Six-element camera motion. t is the image shift (virtual-camera pixels) that the translation
// induces on a point at the reference disparity; r is a rotation vector in radians. The pose maps
// points expressed in one scene's camera frame into another's: X' = R(r) X + T.
struct Pose6 {
    Vec3 t;
    Vec3 r;

    static Pose6 identity() { return {}; }
    bool is_identity() const { return t == Vec3{} && r == Vec3{}; }
    std::array<double, 6> as_array() const { return {t.x, t.y, t.z, r.x, r.y, r.z}; }
    static Pose6 from_array(const std::array<double, 6>& a) { return {{a[0], a[1], a[2]}, {a[3], a[4], a[5]}}; }
};

Mat3 rotation_matrix(const Vec3& r);
Vec3 rotation_vector(const Mat3& m);
// Nearest rotation via one polar-decomposition step sequence (Newton iterations).
Mat3 orthonormalize(const Mat3& m);

// (a o b) applies b first, then a.
Pose6 compose(const Pose6& a, const Pose6& b);
Pose6 invert(const Pose6& p);

struct Projection {
    Vec2 pixel;
    double disparity = 0.0;
    bool valid = true;  // false when the point ends up behind the camera
};

// Camera constants needed to move a (pixel, disparity) observation through a pose.
struct PoseFrame {
    double focal = 1.0;
    Vec2 principal;
    double d_ref = 1.5;

    static PoseFrame of(const RigModel& rig, double d_ref = 1.5) { return {rig.focal_px(), rig.principal_point(), d_ref}; }
};

// Where a point seen at `pixel` with disparity d in the source frame appears after the pose.
// An exactly identity pose returns the input unchanged.
Projection transform_observation(const Pose6& p, const PoseFrame& f, Vec2 pixel, double d);

}  // namespace ringstereo
