#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace ringstereo {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named sub-stream seed: a pure function of the root seed and the tag sequence.
inline uint64_t derive_seed(uint64_t root, std::initializer_list<uint64_t> tags) {
    uint64_t h = splitmix64(root);
    for (uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
    return h;
}

// Stream tags used across the library.
enum class Stream : uint64_t { Scene = 1, Noise = 2, Track = 3, Texture = 4, Terrain = 5, Test = 6 };

inline uint64_t tag(Stream s) { return static_cast<uint64_t>(s); }

// mt19937_64 output is fixed by the standard; the Gaussian transform is done here rather than
// with std::normal_distribution so samples do not depend on the standard library vendor.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * 3.14159265358979323846 * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    uint64_t next() { return eng_(); }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ringstereo
