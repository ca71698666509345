#include "ringstereo/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ringstereo/rng.hpp"

namespace ringstereo {

void RigModel::validate() const {
    if (n_sensors < 2) throw UsageError("rig needs at least 2 sensors");
    if (!(radius_m > 0)) throw UsageError("rig radius must be positive");
    if (!(hfov_deg > 0 && hfov_deg < 180)) throw UsageError("hfov must be in (0, 180) degrees");
    if (width < 16 || height < 16) throw UsageError("image too small for a 16x16 tile");
    if (!residual.empty() && static_cast<int>(residual.size()) != n_sensors)
        throw UsageError("residual list length must equal n_sensors");
    if (!distortion.empty() && static_cast<int>(distortion.size()) != n_sensors)
        throw UsageError("distortion list length must equal n_sensors");
}

double RigModel::focal_px() const { return (0.5 * width) / std::tan(0.5 * hfov_deg * kPi / 180.0); }

double RigModel::sensor_angle(int i) const { return 2.0 * kPi * i / n_sensors; }

Vec2 RigModel::unit_shift(int i) const {
    const double a = sensor_angle(i);
    return {std::sin(a), -std::cos(a)};
}

Vec2 RigModel::residual_of(int i) const { return residual.empty() ? Vec2{} : residual[static_cast<size_t>(i)]; }

Vec3 RigModel::sensor_position(int i) const {
    const Vec2 u = unit_shift(i);
    return {radius_m * u.x, radius_m * u.y, 0.0};
}

RadialDistortion RigModel::virtual_distortion() const {
    RadialDistortion avg;
    if (distortion.empty()) return avg;
    for (const auto& k : distortion) {
        avg.k1 += k.k1;
        avg.k2 += k.k2;
        avg.k3 += k.k3;
    }
    const double n = static_cast<double>(distortion.size());
    avg.k1 /= n;
    avg.k2 /= n;
    avg.k3 /= n;
    return avg;
}

std::string RigModel::hash() const {
    std::ostringstream s;
    s.precision(17);
    s << n_sensors << '|' << radius_m << '|' << hfov_deg << '|' << width << '|' << height;
    for (const auto& r : residual) s << '|' << r.x << ',' << r.y;
    for (const auto& k : distortion) s << '|' << k.k1 << ',' << k.k2 << ',' << k.k3;
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s.str()) h = (h ^ c) * 0x100000001b3ULL;
    std::ostringstream hex;
    hex << std::hex << splitmix64(h);
    return hex.str();
}

std::vector<Vec2> disparity_to_shifts(const RigModel& rig, double d) {
    std::vector<Vec2> out(static_cast<size_t>(rig.n_sensors));
    for (int i = 0; i < rig.n_sensors; ++i) out[i] = rig.unit_shift(i) * d + rig.residual_of(i);
    return out;
}

SplitShift split_shift(Vec2 shift) {
    // std::round rounds halfway cases away from zero.
    const double ix = std::round(shift.x), iy = std::round(shift.y);
    return {{static_cast<int>(ix), static_cast<int>(iy)}, {shift.x - ix, shift.y - iy}};
}

PairTable make_pair_table(const RigModel& rig, const std::vector<int>& subset) {
    std::set<int> seen;
    for (int s : subset) {
        if (s < 0 || s >= rig.n_sensors) throw UsageError("sensor index out of range");
        if (!seen.insert(s).second) throw UsageError("duplicate sensor index in subset");
    }
    if (subset.size() < 2) throw UsageError("subset needs at least 2 sensors");
    PairTable t;
    t.subset.assign(seen.begin(), seen.end());
    for (size_t a = 0; a < t.subset.size(); ++a)
        for (size_t b = a + 1; b < t.subset.size(); ++b) {
            PairInfo p;
            p.i = t.subset[a];
            p.j = t.subset[b];
            // Residuals are constant offsets, not per-unit-disparity terms, so they stay out of
            // the baseline; the tile front end applies them directly.
            p.baseline = rig.unit_shift(p.j) - rig.unit_shift(p.i);
            p.length = p.baseline.norm();
            p.rotation = -std::atan2(p.baseline.y, p.baseline.x);
            p.scale = p.length / 2.0;
            t.pairs.push_back(p);
        }
    return t;
}

std::vector<int> evenly_spaced_subset(const RigModel& rig, int count) {
    if (count < 2 || count > rig.n_sensors || rig.n_sensors % count != 0)
        throw UsageError("subset size must divide the sensor count");
    std::vector<int> s;
    for (int i = 0; i < rig.n_sensors; i += rig.n_sensors / count) s.push_back(i);
    return s;
}

Vec2 distort_normalized(const RadialDistortion& k, Vec2 p) { return p * k.factor(p.dot(p)); }

Vec2 undistort_normalized(const RadialDistortion& k, Vec2 p) {
    if (k.is_identity()) return p;
    Vec2 q = p;
    for (int it = 0; it < 50; ++it) {
        const Vec2 next = p * (1.0 / k.factor(q.dot(q)));
        const bool done = (next - q).norm() < 1e-15;
        q = next;
        if (done) break;
    }
    return q;
}

RigModel load_rig(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read rig file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("rig file " + path.string() + ": " + e.what());
    }
    RigModel r;
    r.n_sensors = j.value("n_sensors", r.n_sensors);
    r.radius_m = j.value("radius_m", r.radius_m);
    r.hfov_deg = j.value("hfov_deg", r.hfov_deg);
    r.width = j.value("image_width", r.width);
    r.height = j.value("image_height", r.height);
    if (j.contains("residuals"))
        for (const auto& e : j["residuals"]) r.residual.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    if (j.contains("distortion"))
        for (const auto& e : j["distortion"])
            r.distortion.push_back({e.value("k1", 0.0), e.value("k2", 0.0), e.value("k3", 0.0)});
    r.validate();
    return r;
}

void save_rig(const std::filesystem::path& path, const RigModel& rig) {
    nlohmann::json j;
    j["n_sensors"] = rig.n_sensors;
    j["radius_m"] = rig.radius_m;
    j["hfov_deg"] = rig.hfov_deg;
    j["image_width"] = rig.width;
    j["image_height"] = rig.height;
    if (!rig.residual.empty()) {
        j["residuals"] = nlohmann::json::array();
        for (const auto& r : rig.residual) j["residuals"].push_back({r.x, r.y});
    }
    if (!rig.distortion.empty()) {
        j["distortion"] = nlohmann::json::array();
        for (const auto& k : rig.distortion) j["distortion"].push_back({{"k1", k.k1}, {"k2", k.k2}, {"k3", k.k3}});
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write rig file " + path.string());
    out << j.dump(2) << "\n";
}

}  // namespace ringstereo
