#pragma once

// Sixteen-way angular partition of a disk, used to tell spots clipped by the
// chief-ray limit from intact ones.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "ledvlc/frame.hpp"
#include "ledvlc/hough.hpp"

namespace ledvlc {

/// 16-sector index of an angle (radians).
inline int sector_of(double angle) {
    const double two_pi = 2.0 * std::numbers::pi;
    double a = std::fmod(angle, two_pi);
    if (a < 0.0) a += two_pi;
    return std::min(15, static_cast<int>(std::floor(a / (two_pi / 16.0))));
}

/// The six sectors facing away from direction sector `l`.
inline std::array<int, 6> opposite_sectors(int l) {
    std::array<int, 6> out{};
    for (int d = -2; d <= 3; ++d) out[d + 2] = ((l + 8 + d) % 16 + 16) % 16;
    return out;
}

/// Mean intensity per angular sector over the disk of radius r about (a, b).
inline std::array<double, 16> sector_means(const Frame& frame, const Circle& c) {
    std::array<double, 16> sum{}, cnt{};
    const int x0 = std::max(0, static_cast<int>(std::floor(c.a - c.r)));
    const int x1 = std::min(frame.width() - 1, static_cast<int>(std::ceil(c.a + c.r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.b - c.r)));
    const int y1 = std::min(frame.height() - 1, static_cast<int>(std::ceil(c.b + c.r)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - c.a, dy = y - c.b;
            if (dx * dx + dy * dy > c.r * c.r || (dx == 0.0 && dy == 0.0)) continue;
            const int s = sector_of(std::atan2(dy, dx));
            sum[s] += frame.at(x, y);
            cnt[s] += 1.0;
        }
    }
    std::array<double, 16> out{};
    for (int s = 0; s < 16; ++s) out[s] = cnt[s] > 0.0 ? sum[s] / cnt[s] : 0.0;
    return out;
}

}  // namespace ledvlc
