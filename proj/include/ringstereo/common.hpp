#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ringstereo {

constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    double norm() const { return std::hypot(x, y); }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    bool operator==(const Vec2&) const = default;
};

struct IVec2 {
    int x = 0;
    int y = 0;
    bool operator==(const IVec2&) const = default;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    bool operator==(const Vec3&) const = default;
};

// Contract violations raised by the library. The CLI maps the categories to exit codes.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ringstereo
