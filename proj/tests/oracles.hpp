#pragma once

// Independent reference computations. Deliberately written without the
// library's helpers so a shared bug cannot hide in both.

#include <cmath>
#include <numbers>

namespace oracle {

// Defocus blur in micrometres, lengths converted to millimetres first.
inline double blur_um(double f_mm, double f_number, double s_m, double s_comm_m) {
    const double s = s_m * 1000.0, sc = s_comm_m * 1000.0;
    const double d = f_mm / f_number;
    return 1000.0 * d * f_mm * std::fabs(s - sc) / (sc * (s - f_mm));
}

inline double chief_angle_deg(double f_mm, double f_number, double l_mm) {
    return std::atan((f_mm / f_number) / (2.0 * l_mm)) * 180.0 / std::numbers::pi;
}

inline double chief_radius_px(double f_mm, double f_number, double l_mm, double pitch_um) {
    return (f_mm * (f_mm / f_number) / (2.0 * l_mm)) * 1000.0 / pitch_um;
}

// Fraction of a disk of radius R lying beyond a chord at signed offset
// `excess` from its center, by midpoint integration over the chord axis.
inline double segment_fraction(double excess, double radius, int steps = 200000) {
    if (excess <= -radius) return 1.0;
    if (excess >= radius) return 0.0;
    const double h = (radius - excess) / steps;
    double area = 0.0;
    for (int k = 0; k < steps; ++k) {
        const double x = excess + (k + 0.5) * h;
        area += 2.0 * std::sqrt(std::max(0.0, radius * radius - x * x)) * h;
    }
    return area / (std::numbers::pi * radius * radius);
}

struct Pt {
    double x, y;
};

// p' = c + (p - c)(1 + k1 r^2 + k2 r^4 + k3 r^6), r normalized by f_px.
inline Pt distort(Pt p, double cx, double cy, double fpx, double k1, double k2, double k3) {
    const double u = (p.x - cx) / fpx, v = (p.y - cy) / fpx;
    const double r2 = u * u + v * v;
    const double s = 1.0 + k1 * r2 + k2 * r2 * r2 + k3 * r2 * r2 * r2;
    return {cx + (p.x - cx) * s, cy + (p.y - cy) * s};
}

}  // namespace oracle
