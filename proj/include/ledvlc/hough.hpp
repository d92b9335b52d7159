#pragma once

// Gradient-directed circular Hough transform.
//
// Each edge pixel votes along its gradient line (both directions) at every
// radius of the search band. Candidates are 3x3x3 local maxima of the
// 3x3-box-summed accumulator, normalized by circumference. Centers are
// refined by the vote centroid of the 3x3 neighborhood, radii by a
// parabola through the neighboring radius bins.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <tuple>
#include <vector>

#include "ledvlc/error.hpp"
#include "ledvlc/frame.hpp"

namespace ledvlc {

struct Circle {
    double a = 0.0;  ///< center x
    double b = 0.0;  ///< center y
    double r = 0.0;
    double score = 0.0;

    friend bool operator==(const Circle&, const Circle&) = default;
};

struct HoughParams {
    double r_min = 20.0;
    double r_max = 30.0;
    double grad_threshold = 0.1;  ///< fraction of full-scale intensity per pixel
    double vote_threshold = 0.3;  ///< fraction of a full circumference of votes
    double min_center_dist = 5.0;
    double radius_step = 1.0;
    bool two_sided = true;  ///< also vote against the gradient (dark-on-bright circles)

    void validate() const {
        if (!(r_min > 0.0) || !(r_min <= r_max)) fail(ErrorKind::InvalidParams, "hough: empty radius band");
        if (!(radius_step > 0.0)) fail(ErrorKind::InvalidParams, "hough: radius_step must be positive");
        if (!(vote_threshold > 0.0 && vote_threshold <= 1.0)) fail(ErrorKind::InvalidParams, "hough: vote_threshold must be in (0,1]");
        if (!(grad_threshold > 0.0)) fail(ErrorKind::InvalidParams, "hough: grad_threshold must be positive");
        if (!(min_center_dist >= 0.0)) fail(ErrorKind::InvalidParams, "hough: min_center_dist must be non-negative");
    }
};

struct EdgePoint {
    int x = 0;
    int y = 0;
    double gx = 0.0;
    double gy = 0.0;

    double magnitude() const { return std::hypot(gx, gy); }
    double direction() const { return std::atan2(gy, gx); }
};

/// Central-difference gradient on interior pixels; keeps |grad| >= threshold.
/// Frames are normalized to [0,1], so the threshold is in full-scale units.
inline std::vector<EdgePoint> edge_map(const Frame& frame, double grad_threshold) {
    std::vector<EdgePoint> edges;
    const int w = frame.width();
    const int h = frame.height();
    const double t2 = grad_threshold * grad_threshold;
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            const double gx = 0.5 * (frame.at(x + 1, y) - frame.at(x - 1, y));
            const double gy = 0.5 * (frame.at(x, y + 1) - frame.at(x, y - 1));
            const double m2 = gx * gx + gy * gy;
            if (m2 > 0.0 && m2 >= t2) edges.push_back({x, y, gx, gy});
        }
    }
    return edges;
}

namespace detail {

// Deterministic tie-break: smaller (b, a, r) wins.
inline bool beats(double s1, int a1, int b1, int r1, double s2, int a2, int b2, int r2) {
    if (s1 != s2) return s1 > s2;
    return std::tie(b1, a1, r1) < std::tie(b2, a2, r2);
}

}  // namespace detail

inline std::vector<Circle> hough_circles(const Frame& frame, const HoughParams& params) {
    params.validate();
    if (frame.empty()) return {};

    const auto edges = edge_map(frame, params.grad_threshold);
    if (edges.empty()) return {};

    // Radius bins, padded by one on each side so band-edge bins can be
    // tested for being true local maxima.
    std::vector<double> radii;
    const double lo = params.r_min - params.radius_step;
    if (lo > 0.0) radii.push_back(lo);
    const int first_in_band = static_cast<int>(radii.size());
    for (double r = params.r_min; r <= params.r_max + 1e-9; r += params.radius_step) radii.push_back(r);
    const int last_in_band = static_cast<int>(radii.size()) - 1;
    radii.push_back(params.r_max + params.radius_step);
    const int nr = static_cast<int>(radii.size());
    const double r_hi = radii.back();

    // Region of interest: edge bounding box grown by the largest radius.
    int ex0 = frame.width(), ey0 = frame.height(), ex1 = 0, ey1 = 0;
    for (const auto& e : edges) {
        ex0 = std::min(ex0, e.x);
        ey0 = std::min(ey0, e.y);
        ex1 = std::max(ex1, e.x);
        ey1 = std::max(ey1, e.y);
    }
    const int grow = static_cast<int>(std::ceil(r_hi)) + 1;
    const int x0 = std::max(0, ex0 - grow), y0 = std::max(0, ey0 - grow);
    const int x1 = std::min(frame.width() - 1, ex1 + grow), y1 = std::min(frame.height() - 1, ey1 + grow);
    const int rw = x1 - x0 + 1, rh = y1 - y0 + 1;
    const std::size_t plane = static_cast<std::size_t>(rw) * static_cast<std::size_t>(rh);

    std::vector<std::int32_t> acc(plane * nr, 0);
    for (const auto& e : edges) {
        const double m = e.magnitude();
        const double ux = e.gx / m, uy = e.gy / m;
        for (int k = 0; k < nr; ++k) {
            const double r = radii[k];
            for (double sgn : {1.0, -1.0}) {
                if (sgn < 0.0 && !params.two_sided) continue;
                const int cx = static_cast<int>(std::floor(e.x + sgn * r * ux + 0.5)) - x0;
                const int cy = static_cast<int>(std::floor(e.y + sgn * r * uy + 0.5)) - y0;
                if (cx < 0 || cy < 0 || cx >= rw || cy >= rh) continue;
                ++acc[k * plane + static_cast<std::size_t>(cy) * rw + cx];
            }
        }
    }

    // 3x3 box sums over one reference circumference (band center), so
    // peaks compete on raw votes. Normalizing each bin by its own radius
    // would let partial arcs at the small end of the band win suppression.
    const double r_ref = 0.5 * (params.r_min + params.r_max);
    const double norm = 1.0 / (2.0 * std::numbers::pi * r_ref);
    std::vector<double> score(plane * nr, 0.0);
    for (int k = 0; k < nr; ++k) {
        const std::int32_t* a = acc.data() + k * plane;
        double* s = score.data() + k * plane;
        for (int y = 0; y < rh; ++y) {
            for (int x = 0; x < rw; ++x) {
                std::int32_t sum = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= rh) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= rw) continue;
                        sum += a[static_cast<std::size_t>(yy) * rw + xx];
                    }
                }
                s[static_cast<std::size_t>(y) * rw + x] = sum * norm;
            }
        }
    }

    auto S = [&](int k, int x, int y) { return score[k * plane + static_cast<std::size_t>(y) * rw + x]; };

    struct Peak {
        Circle c;
        int ia, ib, ir;
    };
    std::vector<Peak> peaks;
    for (int k = first_in_band; k <= last_in_band; ++k) {
        for (int y = 0; y < rh; ++y) {
            for (int x = 0; x < rw; ++x) {
                const double s0 = S(k, x, y);
                if (s0 * r_ref < params.vote_threshold * radii[k]) continue;  // per-radius full-circle count
                bool is_max = true;
                for (int dk = -1; dk <= 1 && is_max; ++dk) {
                    const int kk = k + dk;
                    if (kk < 0 || kk >= nr) continue;
                    for (int dy = -1; dy <= 1 && is_max; ++dy) {
                        const int yy = y + dy;
                        if (yy < 0 || yy >= rh) continue;
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int xx = x + dx;
                            if (xx < 0 || xx >= rw || (dk == 0 && dy == 0 && dx == 0)) continue;
                            if (detail::beats(S(kk, xx, yy), xx, yy, kk, s0, x, y, k)) {
                                is_max = false;
                                break;
                            }
                        }
                    }
                }
                if (!is_max) continue;

                // Vote centroid of the 3x3 neighborhood.
                const std::int32_t* a = acc.data() + k * plane;
                double wsum = 0.0, ax = 0.0, ay = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= rh) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= rw) continue;
                        const double v = a[static_cast<std::size_t>(yy) * rw + xx];
                        wsum += v;
                        ax += v * xx;
                        ay += v * yy;
                    }
                }
                const double cxr = wsum > 0.0 ? ax / wsum : x;
                const double cyr = wsum > 0.0 ? ay / wsum : y;

                double r = radii[k];
                if (k > 0 && k + 1 < nr) {
                    const double sm = S(k - 1, x, y), sp = S(k + 1, x, y);
                    const double denom = sm - 2.0 * s0 + sp;
                    if (denom < 0.0) r += std::clamp(0.5 * (sm - sp) / denom, -0.5, 0.5) * params.radius_step;
                }
                peaks.push_back({{cxr + x0, cyr + y0, r, s0}, x + x0, y + y0, k});
            }
        }
    }

    std::sort(peaks.begin(), peaks.end(), [](const Peak& p, const Peak& q) {
        return detail::beats(p.c.score, p.ia, p.ib, p.ir, q.c.score, q.ia, q.ib, q.ir);
    });

    std::vector<Circle> out;
    const double min_d2 = params.min_center_dist * params.min_center_dist;
    for (const auto& p : peaks) {
        bool keep = true;
        for (const auto& c : out) {
            const double dx = c.a - p.c.a, dy = c.b - p.c.b;
            if (dx * dx + dy * dy < min_d2) {
                keep = false;
                break;
            }
        }
        if (keep) out.push_back(p.c);
    }
    return out;
}

}  // namespace ledvlc
