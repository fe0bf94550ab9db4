#pragma once

#include <cmath>

namespace nbl {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double a) const { return {a * x, a * y}; }
    Vec2 operator/(double a) const { return {x / a, y / a}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }
    Vec2 normalized() const { double n = norm(); return {x / n, y / n}; }
    // rotate by +90 degrees (counterclockwise)
    Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double a, const Vec2& v) { return {a * v.x, a * v.y}; }

} // namespace nbl
