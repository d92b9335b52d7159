#pragma once

#include <cmath>

namespace ledvlc {

/// Image-plane point in pixels. x grows with column, y with row.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double squared_norm(Point2 p) { return p.x * p.x + p.y * p.y; }
inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

/// LED index on the transmitter grid: i runs along x, j along y.
struct LedIndex {
    int i = 0;
    int j = 0;

    friend auto operator<=>(const LedIndex&, const LedIndex&) = default;
};

}  // namespace ledvlc
