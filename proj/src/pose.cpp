#include "ringstereo/pose.hpp"

#include <Eigen/Dense>

namespace ringstereo {

namespace {

Eigen::Matrix3d to_eigen(const Mat3& m) {
    Eigen::Matrix3d e;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) e(r, c) = m[r * 3 + c];
    return e;
}

Mat3 from_eigen(const Eigen::Matrix3d& e) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m[r * 3 + c] = e(r, c);
    return m;
}

Eigen::Vector3d ev(const Vec3& v) { return {v.x, v.y, v.z}; }
Vec3 vv(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace

Mat3 rotation_matrix(const Vec3& r) {
    const Eigen::Vector3d v = ev(r);
    const double th = v.norm();
    if (th == 0.0) return from_eigen(Eigen::Matrix3d::Identity());
    return from_eigen(Eigen::AngleAxisd(th, v / th).toRotationMatrix());
}

Vec3 rotation_vector(const Mat3& m) {
    const Eigen::AngleAxisd aa(to_eigen(m));
    if (aa.angle() == 0.0) return {};
    return vv(aa.axis() * aa.angle());
}

Mat3 orthonormalize(const Mat3& m) {
    Eigen::Matrix3d x = to_eigen(m);
    for (int i = 0; i < 4; ++i) x = 0.5 * (x + x.inverse().transpose());
    return from_eigen(x);
}

Pose6 compose(const Pose6& a, const Pose6& b) {
    if (b.is_identity()) return a;
    if (a.is_identity()) return b;
    const Eigen::Matrix3d ra = to_eigen(rotation_matrix(a.r));
    const Eigen::Matrix3d rb = to_eigen(rotation_matrix(b.r));
    const Mat3 rc = orthonormalize(from_eigen(ra * rb));
    Pose6 c;
    c.r = rotation_vector(rc);
    c.t = vv(ra * ev(b.t) + ev(a.t));
    return c;
}

Pose6 invert(const Pose6& p) {
    if (p.is_identity()) return p;
    const Eigen::Matrix3d rt = to_eigen(rotation_matrix(p.r)).transpose();
    Pose6 q;
    q.r = {-p.r.x, -p.r.y, -p.r.z};
    q.t = vv(-(rt * ev(p.t)));
    return q;
}

Projection transform_observation(const Pose6& p, const PoseFrame& f, Vec2 pixel, double d) {
    if (p.is_identity()) return {pixel, d, true};
    // Work with the ray scaled to unit depth; translation scales with inverse depth, which is
    // d / (focal * d_ref) in the units of Pose6::t.
    const Eigen::Vector3d m((pixel.x - f.principal.x) / f.focal, (pixel.y - f.principal.y) / f.focal, 1.0);
    const Eigen::Vector3d v = to_eigen(rotation_matrix(p.r)) * m + ev(p.t) * (d / (f.focal * f.d_ref));
    Projection out;
    out.valid = v.z() > 1e-9;
    if (!out.valid) return out;
    out.pixel = {f.principal.x + f.focal * v.x() / v.z(), f.principal.y + f.focal * v.y() / v.z()};
    out.disparity = d / v.z();
    return out;
}

}  // namespace ringstereo
