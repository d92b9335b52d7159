#pragma once

// Pilot phase: locate pilot spots, fit radial distortion against an ideal
// lattice anchored at the pilot nearest the principal point, rectify, and
// reconstruct the LED grid, link distance and expected blur diameter.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "ledvlc/channel.hpp"
#include "ledvlc/error.hpp"
#include "ledvlc/frame.hpp"
#include "ledvlc/hough.hpp"
#include "ledvlc/optics.hpp"

namespace ledvlc {

struct PilotCorrespondence {
    LedIndex index{};
    Point2 observed{};  ///< distorted image center
    Point2 ideal{};     ///< model (undistorted) center
};

struct GridEstimate {
    Point2 center{};
    Point2 top_left{}, top_right{}, bottom_left{}, bottom_right{};
    double width = 0.0;
    double height = 0.0;
    double delta_a = 0.0;
    double delta_b = 0.0;
    IdealGrid grid{};
};

struct DistortionFit {
    DistortionParams params{};
    bool clamped = false;
};

struct CalibrationConfig {
    int model_order = 1;
    bool bounded = false;
    int refine_iters = 3;
    int pilot_stride = 3;
    double k_corr = 1.3;
    double pilot_c_px = 0.0;       ///< prior spot diameter for detection; 0 derives it from the geometry
    double pilot_band = 0.25;      ///< Hough radius band half-width, fraction of the prior radius
    double c_exp_override = 0.0;   ///< > 0 replaces the blur-model prediction
    bool alpha_from_geometry = false;
    HoughParams hough{};

    void validate() const {
        if (model_order < 1 || model_order > 3) fail(ErrorKind::Validation, "calibrate: model_order must be 1, 2 or 3");
        if (refine_iters < 0) fail(ErrorKind::Validation, "calibrate: refine_iters must be >= 0");
        if (pilot_stride < 1) fail(ErrorKind::Validation, "calibrate: pilot_stride must be >= 1");
        if (!(k_corr > 0.0)) fail(ErrorKind::Validation, "calibrate: k_corr must be positive");
        if (!(pilot_band > 0.0 && pilot_band < 1.0)) fail(ErrorKind::Validation, "calibrate: pilot_band must be in (0,1)");
        if (pilot_c_px < 0.0 || c_exp_override < 0.0) fail(ErrorKind::Validation, "calibrate: diameters must be non-negative");
    }
};

struct CalibrationReport {
    DistortionParams k{};
    int model_order = 1;
    bool clamped = false;
    double rmse = 0.0;
    double rmse_x = 0.0;
    double rmse_y = 0.0;
    double rectified_rmse = 0.0;
    double alpha = 0.0;
    double s_comm_est = 0.0;
    double c_calc_um = 0.0;
    double c_exp_model = 0.0;
    double c_exp = 0.0;
    double plateau = 0.0;
    double background = 0.0;
    int pilots_expected = 0;
    int pilots_detected = 0;
    int pilots_matched = 0;
    LedIndex reference{};
    bool overlap_warning = false;
    GridEstimate grid{};
    std::vector<PilotCorrespondence> pilots;
};

// ---------------------------------------------------------------------------
// Detection and association

/// Intensity-weighted centroid of the part of a spot above half its local
/// peak. Used only on spots with no neighbor inside their diameter.
inline Point2 spot_centroid(const Frame& frame, Point2 guess, double radius) {
    const double win = radius + 2.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(guess.x - win)));
    const int x1 = std::min(frame.width() - 1, static_cast<int>(std::ceil(guess.x + win)));
    const int y0 = std::max(0, static_cast<int>(std::floor(guess.y - win)));
    const int y1 = std::min(frame.height() - 1, static_cast<int>(std::ceil(guess.y + win)));
    double peak = 0.0;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (squared_norm(Point2{x - guess.x, y - guess.y}) <= win * win) peak = std::max(peak, frame.at(x, y));
    const double cut = 0.5 * peak;
    double ws = 0.0, sx = 0.0, sy = 0.0;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            if (squared_norm(Point2{x - guess.x, y - guess.y}) > win * win) continue;
            const double w = frame.at(x, y) - cut;
            if (w <= 0.0) continue;
            ws += w;
            sx += w * x;
            sy += w * y;
        }
    }
    return ws > 0.0 ? Point2{sx / ws, sy / ws} : guess;
}

inline std::vector<Circle> detect_pilots(const Frame& frame, double expected_c, const HoughParams& base,
                                         int expected_count, double band = 0.25) {
    if (!(expected_c > 0.0)) fail(ErrorKind::InvalidParams, "detect_pilots: expected C must be positive");
    HoughParams params = base;
    const double r0 = expected_c / 2.0;
    params.r_min = std::max(1.0, std::floor(r0 * (1.0 - band)));
    params.r_max = std::ceil(r0 * (1.0 + band));
    params.min_center_dist = std::max(params.min_center_dist, r0);
    auto circles = hough_circles(frame, params);
    if (2 * static_cast<int>(circles.size()) < expected_count) {
        fail(ErrorKind::CalibrationFailure, "detect_pilots: found " + std::to_string(circles.size()) + " of " +
                                                std::to_string(expected_count) + " expected pilots");
    }
    for (auto& c : circles) {
        bool isolated = true;
        for (const auto& o : circles) {
            if (&o == &c) continue;
            if (distance({c.a, c.b}, {o.a, o.b}) < c.r + o.r + 2.0) {
                isolated = false;
                break;
            }
        }
        if (isolated) {
            const Point2 p = spot_centroid(frame, {c.a, c.b}, c.r);
            c.a = p.x;
            c.b = p.y;
        }
    }
    return circles;
}

/// Drops detections straddling r_max whose pixels beyond r_max are dark.
/// Clipped spots bias the Hough center toward the principal point.
inline std::vector<Circle> drop_clipped_pilots(const std::vector<Circle>& circles, const Frame& frame,
                                               const CameraModel& camera) {
    const double r_max = chief_ray_limits(camera).r_max_px;
    const Point2 pp = camera.principal_point();
    std::vector<Circle> out;
    for (const auto& c : circles) {
        if (distance({c.a, c.b}, pp) + c.r <= r_max) {
            out.push_back(c);
            continue;
        }
        double in_sum = 0.0, in_n = 0.0, out_sum = 0.0, out_n = 0.0;
        const int x0 = std::max(0, static_cast<int>(std::floor(c.a - c.r)));
        const int x1 = std::min(frame.width() - 1, static_cast<int>(std::ceil(c.a + c.r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(c.b - c.r)));
        const int y1 = std::min(frame.height() - 1, static_cast<int>(std::ceil(c.b + c.r)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                if (distance({double(x), double(y)}, {c.a, c.b}) > c.r) continue;
                const bool beyond = distance({double(x), double(y)}, pp) > r_max;
                (beyond ? out_sum : in_sum) += frame.at(x, y);
                (beyond ? out_n : in_n) += 1.0;
            }
        }
        if (out_n == 0.0 || in_n == 0.0 || out_sum / out_n >= 0.5 * in_sum / in_n) out.push_back(c);
    }
    return out;
}

/// Nominal pilot lattice implied by the detections: spacing from the median
/// nearest-neighbor distance, indices counted from the lowest row and column
/// of detected pilots.
inline IdealGrid nominal_pilot_grid(const std::vector<Circle>& candidates, const CameraModel& camera, int n, int stride) {
    if (candidates.size() < 2) fail(ErrorKind::CalibrationFailure, "nominal grid: need at least two pilots");
    std::vector<double> nn;
    for (const auto& c : candidates) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& o : candidates)
            if (&o != &c) best = std::min(best, distance({c.a, c.b}, {o.a, o.b}));
        nn.push_back(best);
    }
    std::nth_element(nn.begin(), nn.begin() + nn.size() / 2, nn.end());
    const double spacing = nn[nn.size() / 2];

    const Point2 pp = camera.principal_point();
    const auto ref_it = std::min_element(candidates.begin(), candidates.end(), [&](const Circle& p, const Circle& q) {
        return squared_norm(Point2{p.a, p.b} - pp) < squared_norm(Point2{q.a, q.b} - pp);
    });
    const Point2 ref{ref_it->a, ref_it->b};

    int min_i = 0, min_j = 0, max_i = 0, max_j = 0;
    for (const auto& c : candidates) {
        const Point2 d = Point2{c.a, c.b} - ref;
        const double qi = std::round(d.x / spacing), qj = std::round(d.y / spacing);
        if (std::abs(d.x - qi * spacing) > 0.3 * spacing || std::abs(d.y - qj * spacing) > 0.3 * spacing) continue;
        min_i = std::min(min_i, static_cast<int>(qi));
        min_j = std::min(min_j, static_cast<int>(qj));
        max_i = std::max(max_i, static_cast<int>(qi));
        max_j = std::max(max_j, static_cast<int>(qj));
    }
    const int span = (n - 1) / stride;
    if (max_i - min_i > span || max_j - min_j > span) {
        fail(ErrorKind::CalibrationFailure, "nominal grid: detected pilots span more than the pilot lattice");
    }
    const double delta = spacing / stride;
    return {{ref.x + min_i * spacing, ref.y + min_j * spacing}, delta, delta, n};
}

inline std::vector<PilotCorrespondence> match_pilots(const std::vector<Circle>& candidates, const IdealGrid& nominal,
                                                     const SymbolMatrix& pattern, int stride,
                                                     Point2 visible_center = {},
                                                     double visible_radius = std::numeric_limits<double>::infinity()) {
    if (pattern.n() != nominal.n) fail(ErrorKind::SizeMismatch, "match_pilots: pattern and grid sizes differ");
    const auto pilots = pattern.active();
    const double gate = 0.5 * stride * std::min(nominal.delta_a, nominal.delta_b);

    // Each candidate picks its nearest pilot inside the gate; each pilot keeps its nearest candidate.
    std::vector<int> owner(pilots.size(), -1);
    std::vector<double> owner_dist(pilots.size(), std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const Point2 p{candidates[c].a, candidates[c].b};
        int best = -1;
        double best_d = gate;
        for (std::size_t k = 0; k < pilots.size(); ++k) {
            const double d = distance(p, nominal.point(pilots[k]));
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(k);
            }
        }
        if (best >= 0 && best_d < owner_dist[best]) {
            owner[best] = static_cast<int>(c);
            owner_dist[best] = best_d;
        }
    }

    std::vector<PilotCorrespondence> out;
    for (std::size_t k = 0; k < pilots.size(); ++k) {
        if (owner[k] < 0) continue;
        const auto& c = candidates[owner[k]];
        out.push_back({pilots[k], {c.a, c.b}, nominal.point(pilots[k])});
    }
    // Pilots the chief-ray limit hides are not counted against the match rate.
    std::size_t visible = 0;
    for (const auto& k : pilots) visible += distance(nominal.point(k), visible_center) <= visible_radius;
    if (visible == 0 || 4 * out.size() < 3 * visible) {
        fail(ErrorKind::CalibrationFailure, "match_pilots: matched " + std::to_string(out.size()) + " of " +
                                                std::to_string(visible) + " visible pilots");
    }
    return out;
}

/// Pilot nearest the principal point; ties go to the smaller (i, j).
inline LedIndex select_reference(const std::vector<PilotCorrespondence>& corrs, const CameraModel& camera) {
    if (corrs.empty()) fail(ErrorKind::InvalidParams, "select_reference: no correspondences");
    const Point2 pp = camera.principal_point();
    const PilotCorrespondence* best = &corrs.front();
    double best_d = squared_norm(best->observed - pp);
    for (const auto& c : corrs) {
        const double d = squared_norm(c.observed - pp);
        if (d < best_d || (d == best_d && c.index < best->index)) {
            best = &c;
            best_d = d;
        }
    }
    return best->index;
}

/// a_i = a_ref + alpha (i - i0), b_j = b_ref + alpha (j - j0).
inline std::vector<std::pair<LedIndex, Point2>> ideal_pilot_grid(LedIndex ref_index, Point2 ref_point, double alpha,
                                                                 const SymbolMatrix& pattern) {
    if (!(alpha > 0.0)) fail(ErrorKind::InvalidParams, "ideal_pilot_grid: alpha must be positive");
    std::vector<std::pair<LedIndex, Point2>> out;
    for (const auto& idx : pattern.active()) {
        out.emplace_back(idx, Point2{ref_point.x + alpha * (idx.i - ref_index.i), ref_point.y + alpha * (idx.j - ref_index.j)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distortion fit

/// Least-squares radial coefficients. For fixed ideal points the forward
/// model is linear in K: observed - ideal = (ideal - c) * sum_m k_m r^(2m).
inline DistortionFit fit_distortion(const std::vector<PilotCorrespondence>& corrs, const CameraModel& camera, int order,
                                    bool bounded = false) {
    if (order < 1 || order > 3) fail(ErrorKind::InvalidParams, "fit_distortion: order must be 1, 2 or 3");
    if (static_cast<int>(corrs.size()) < order + 3) fail(ErrorKind::IllConditionedFit, "fit_distortion: too few correspondences");

    const auto rows = static_cast<Eigen::Index>(2 * corrs.size());
    Eigen::MatrixXd a(rows, order);
    Eigen::VectorXd rhs(rows);
    for (std::size_t k = 0; k < corrs.size(); ++k) {
        const Point2 d = corrs[k].ideal - camera.principal_point();
        const double r2 = normalized_radius_sq(corrs[k].ideal, camera);
        double rp = r2;
        for (int m = 0; m < order; ++m) {
            a(2 * k, m) = d.x * rp;
            a(2 * k + 1, m) = d.y * rp;
            rp *= r2;
        }
        rhs(2 * k) = corrs[k].observed.x - corrs[k].ideal.x;
        rhs(2 * k + 1) = corrs[k].observed.y - corrs[k].ideal.y;
    }

    // Column equilibration so the rank test is scale free.
    Eigen::VectorXd scale(order);
    for (int m = 0; m < order; ++m) {
        const double nrm = a.col(m).norm();
        if (!(nrm > 0.0)) fail(ErrorKind::IllConditionedFit, "fit_distortion: pilots carry no radial information");
        scale(m) = nrm;
        a.col(m) /= nrm;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-9);
    if (qr.rank() < order) fail(ErrorKind::IllConditionedFit, "fit_distortion: rank-deficient system");
    const Eigen::VectorXd sol = qr.solve(rhs).cwiseQuotient(scale);

    DistortionFit fit;
    fit.params.k1 = sol(0);
    if (order >= 2) fit.params.k2 = sol(1);
    if (order >= 3) fit.params.k3 = sol(2);
    if (bounded && !fit.params.within_bounds()) {
        fit.params = fit.params.clamped();
        fit.clamped = true;
    }
    return fit;
}

struct ResidualStats {
    double rmse = 0.0;
    double rmse_x = 0.0;
    double rmse_y = 0.0;
};

inline ResidualStats residual_stats(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    if (a.size() != b.size() || a.empty()) fail(ErrorKind::SizeMismatch, "residual_stats: point sets differ");
    double sx = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        sx += (a[k].x - b[k].x) * (a[k].x - b[k].x);
        sy += (a[k].y - b[k].y) * (a[k].y - b[k].y);
    }
    const double n = static_cast<double>(a.size());
    return {std::sqrt((sx + sy) / n), std::sqrt(sx / n), std::sqrt(sy / n)};
}

/// Forward-model residual: observed centers against the fitted distortion
/// applied to the ideal lattice. This is the quantity the fit minimizes.
inline ResidualStats fit_residual(const std::vector<PilotCorrespondence>& corrs, const CameraModel& camera) {
    std::vector<Point2> obs, model;
    for (const auto& c : corrs) {
        obs.push_back(c.observed);
        model.push_back(distort_point(c.ideal, camera));
    }
    return residual_stats(obs, model);
}

inline std::vector<Point2> rectify_centers(const std::vector<PilotCorrespondence>& corrs, const CameraModel& camera,
                                           int refine_iters = 3) {
    std::vector<Point2> out;
    out.reserve(corrs.size());
    for (const auto& c : corrs) out.push_back(undistort_point(c.observed, camera, refine_iters));
    return out;
}

// ---------------------------------------------------------------------------
// Grid reconstruction

inline GridEstimate estimate_grid(const std::vector<Point2>& rectified, int n, int stride) {
    if (rectified.size() < 4) fail(ErrorKind::CalibrationFailure, "estimate_grid: need at least four pilots");
    if (n < 2 || stride < 1) fail(ErrorKind::InvalidParams, "estimate_grid: invalid n or stride");

    GridEstimate g;
    for (const auto& p : rectified) g.center = g.center + p;
    g.center = (1.0 / static_cast<double>(rectified.size())) * g.center;

    std::vector<std::size_t> order(rectified.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
        return squared_norm(rectified[p] - g.center) > squared_norm(rectified[q] - g.center);
    });

    std::array<bool, 4> seen{};  // TL, TR, BL, BR
    for (int k = 0; k < 4; ++k) {
        const Point2 p = rectified[order[k]];
        if (p.x == g.center.x || p.y == g.center.y) fail(ErrorKind::AmbiguousCorner, "estimate_grid: corner on a quadrant boundary");
        const bool right = p.x > g.center.x;
        const bool upper = p.y > g.center.y;
        const int role = (upper ? 0 : 2) + (right ? 1 : 0);
        if (seen[role]) fail(ErrorKind::AmbiguousCorner, "estimate_grid: two farthest points share a corner role");
        seen[role] = true;
        switch (role) {
            case 0: g.top_left = p; break;
            case 1: g.top_right = p; break;
            case 2: g.bottom_left = p; break;
            default: g.bottom_right = p; break;
        }
    }

    g.width = distance(g.top_right, g.top_left);
    g.height = distance(g.bottom_left, g.top_left);
    g.delta_a = g.width / (n - 1);
    g.delta_b = g.height / (n - 1);
    g.grid = {g.bottom_left, g.delta_a, g.delta_b, n};
    return g;
}

/// Grid from the indexed pilot lattice, for frames where a corner pilot is
/// missing (typically cut off by vignetting).
inline GridEstimate lattice_grid(const std::vector<PilotCorrespondence>& corrs, const std::vector<Point2>& rectified,
                                 double alpha, int n) {
    if (corrs.empty() || corrs.size() != rectified.size()) fail(ErrorKind::CalibrationFailure, "lattice_grid: no pilots");
    if (!(alpha > 0.0)) fail(ErrorKind::InvalidParams, "lattice_grid: alpha must be positive");
    Point2 origin{};
    for (std::size_t k = 0; k < corrs.size(); ++k) {
        origin = origin + (rectified[k] - Point2{alpha * corrs[k].index.i, alpha * corrs[k].index.j});
    }
    origin = (1.0 / static_cast<double>(corrs.size())) * origin;
    GridEstimate g;
    g.grid = {origin, alpha, alpha, n};
    g.bottom_left = g.grid.point(0, 0);
    g.bottom_right = g.grid.point(n - 1, 0);
    g.top_left = g.grid.point(0, n - 1);
    g.top_right = g.grid.point(n - 1, n - 1);
    g.center = g.grid.center();
    g.width = g.height = alpha * (n - 1);
    g.delta_a = g.delta_b = alpha;
    return g;
}

// ---------------------------------------------------------------------------
// Full pilot-phase pipeline

namespace detail {

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw e.stage().empty() ? e.with_stage(stage) : e;
    }
}

/// Least-squares lattice step with the reference fixed.
inline double lattice_step(const std::vector<PilotCorrespondence>& corrs, const std::vector<Point2>& points,
                           LedIndex ref_index, Point2 ref_point) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < corrs.size(); ++k) {
        const double di = corrs[k].index.i - ref_index.i;
        const double dj = corrs[k].index.j - ref_index.j;
        num += (points[k].x - ref_point.x) * di + (points[k].y - ref_point.y) * dj;
        den += di * di + dj * dj;
    }
    if (!(den > 0.0)) fail(ErrorKind::CalibrationFailure, "lattice step: pilots share one index");
    return num / den;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

inline double local_mean(const Frame& frame, Point2 p) {
    const int cx = static_cast<int>(std::lround(p.x)), cy = static_cast<int>(std::lround(p.y));
    double s = 0.0;
    int n = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            if (frame.contains(cx + dx, cy + dy)) {
                s += frame.at(cx + dx, cy + dy);
                ++n;
            }
    return n ? s / n : 0.0;
}

}  // namespace detail

inline constexpr int kMaxCalibrationSweeps = 200;

inline double pilot_prior_c(const CameraModel& camera, const LinkGeometry& geometry, const CalibrationConfig& config) {
    if (config.pilot_c_px > 0.0) return config.pilot_c_px;
    return blur_diameter(camera, geometry.focus_m, geometry.comm_m, config.k_corr).expected_px;
}

inline CalibrationReport calibrate_pilot_frame(const Frame& frame, const CameraModel& camera, const LinkGeometry& geometry,
                                               const CalibrationConfig& config) {
    config.validate();
    const int n = geometry.n;
    const int stride = config.pilot_stride;
    const SymbolMatrix pattern = detail::staged("pilot-pattern", [&] { return pilot_pattern(n, stride); });
    const int expected = pattern.count_ones();

    CalibrationReport rep;
    rep.model_order = config.model_order;
    rep.pilots_expected = expected;

    const double prior_c = detail::staged("detect", [&] { return pilot_prior_c(camera, geometry, config); });
    const auto candidates = detail::staged("detect", [&] {
        return drop_clipped_pilots(detect_pilots(frame, prior_c, config.hough, expected, config.pilot_band), frame, camera);
    });
    rep.pilots_detected = static_cast<int>(candidates.size());

    auto corrs = detail::staged("match", [&] {
        const IdealGrid nominal = nominal_pilot_grid(candidates, camera, n, stride);
        return match_pilots(candidates, nominal, pattern, stride, camera.principal_point(),
                            chief_ray_limits(camera).r_max_px);
    });
    rep.pilots_matched = static_cast<int>(corrs.size());

    const LedIndex ref = select_reference(corrs, camera);
    rep.reference = ref;
    const auto ref_it = std::find_if(corrs.begin(), corrs.end(), [&](const auto& c) { return c.index == ref; });

    std::vector<Point2> observed;
    for (const auto& c : corrs) observed.push_back(c.observed);

    CameraModel fitted = camera;
    fitted.distortion = {};
    auto assign_ideal = [&](Point2 ref_point, const std::vector<Point2>& basis) {
        double alpha = config.alpha_from_geometry ? pixel_scale(camera, geometry)
                                                  : detail::lattice_step(corrs, basis, ref, ref_point);
        for (const auto& [idx, p] : ideal_pilot_grid(ref, ref_point, alpha, pattern)) {
            for (auto& c : corrs)
                if (c.index == idx) c.ideal = p;
        }
        return alpha;
    };

    // Alternate: anchor the ideal lattice on the (rectified) reference pilot,
    // fit K, re-rectify, re-anchor. The exact geometry is a fixed point; the
    // lattice step and k1 trade off, so a single refit leaves k1 biased and
    // the loop runs until both settle.
    DistortionFit fit;
    rep.alpha = detail::staged("ideal-grid", [&] { return assign_ideal(ref_it->observed, observed); });
    for (int iter = 0; iter < kMaxCalibrationSweeps; ++iter) {
        fit = detail::staged("fit", [&] { return fit_distortion(corrs, fitted, config.model_order, config.bounded); });
        const DistortionParams previous = fitted.distortion;
        fitted.distortion = fit.params;
        const double alpha_prev = rep.alpha;
        detail::staged("rectify", [&] {
            const auto rect = rectify_centers(corrs, fitted, config.refine_iters);
            const Point2 ref_rect = undistort_point(ref_it->observed, fitted, config.refine_iters);
            rep.alpha = assign_ideal(ref_rect, rect);
            return 0;
        });
        const double dk = std::abs(fit.params.k1 - previous.k1) + std::abs(fit.params.k2 - previous.k2) +
                          std::abs(fit.params.k3 - previous.k3);
        if (iter > 0 && std::abs(rep.alpha - alpha_prev) <= 1e-12 * rep.alpha && dk <= 1e-12) break;
    }
    fit = detail::staged("fit", [&] { return fit_distortion(corrs, fitted, config.model_order, config.bounded); });
    fitted.distortion = fit.params;
    rep.k = fit.params;
    rep.clamped = fit.clamped;

    const auto rectified = detail::staged("rectify", [&] { return rectify_centers(corrs, fitted, config.refine_iters); });
    const auto res = fit_residual(corrs, fitted);
    rep.rmse = res.rmse;
    rep.rmse_x = res.rmse_x;
    rep.rmse_y = res.rmse_y;
    std::vector<Point2> ideal;
    for (const auto& c : corrs) ideal.push_back(c.ideal);
    rep.rectified_rmse = residual_stats(rectified, ideal).rmse;

    rep.grid = detail::staged("grid", [&] {
        int corners = 0;
        for (const auto& c : corrs) {
            corners += (c.index.i == 0 || c.index.i == n - 1) && (c.index.j == 0 || c.index.j == n - 1);
        }
        return corners == 4 ? estimate_grid(rectified, n, stride) : lattice_grid(corrs, rectified, rep.alpha, n);
    });
    rep.s_comm_est = detail::staged("distance", [&] { return infer_distance(rep.grid.delta_a, geometry); });
    const auto blur = detail::staged("blur", [&] { return blur_diameter(camera, geometry.focus_m, rep.s_comm_est, config.k_corr); });
    rep.c_calc_um = blur.calc_um;
    rep.c_exp_model = blur.expected_px;
    rep.c_exp = config.c_exp_override > 0.0 ? config.c_exp_override : blur.expected_px;

    std::vector<double> levels;
    for (const auto& c : corrs) levels.push_back(detail::local_mean(frame, c.observed));
    rep.plateau = detail::median_of(levels);
    rep.background = detail::median_of(frame.data());
    rep.overlap_warning = !check_pilot_spacing(rep.grid.grid, pattern, rep.c_exp);
    rep.pilots = std::move(corrs);
    return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const CalibrationReport& r) {
    auto pt = [](Point2 p) { return nlohmann::json::array({p.x, p.y}); };
    nlohmann::json j;
    j["k1"] = r.k.k1;
    j["k2"] = r.k.k2;
    j["k3"] = r.k.k3;
    j["model_order"] = r.model_order;
    j["clamped"] = r.clamped;
    j["rmse"] = r.rmse;
    j["rmse_x"] = r.rmse_x;
    j["rmse_y"] = r.rmse_y;
    j["rectified_rmse"] = r.rectified_rmse;
    j["alpha"] = r.alpha;
    j["delta_a"] = r.grid.delta_a;
    j["delta_b"] = r.grid.delta_b;
    j["width"] = r.grid.width;
    j["height"] = r.grid.height;
    j["n"] = r.grid.grid.n;
    j["origin"] = pt(r.grid.grid.origin);
    j["center"] = pt(r.grid.center);
    j["corners"] = {{"tl", pt(r.grid.top_left)},
                    {"tr", pt(r.grid.top_right)},
                    {"bl", pt(r.grid.bottom_left)},
                    {"br", pt(r.grid.bottom_right)}};
    j["s_comm_est"] = r.s_comm_est;
    j["c_calc_um"] = r.c_calc_um;
    j["c_exp_model"] = r.c_exp_model;
    j["c_exp"] = r.c_exp;
    j["plateau"] = r.plateau;
    j["background"] = r.background;
    j["pilots_expected"] = r.pilots_expected;
    j["pilots_detected"] = r.pilots_detected;
    j["pilots_matched"] = r.pilots_matched;
    j["reference"] = {r.reference.i, r.reference.j};
    j["overlap_warning"] = r.overlap_warning;
    j["rectification"] = "radial-only";
    auto pilots = nlohmann::json::array();
    for (const auto& p : r.pilots) pilots.push_back({{"i", p.index.i}, {"j", p.index.j}, {"observed", pt(p.observed)}, {"ideal", pt(p.ideal)}});
    j["pilots"] = std::move(pilots);
    return j;
}

inline CalibrationReport calibration_from_json(const nlohmann::json& j) {
    auto pt = [](const nlohmann::json& a) { return Point2{a.at(0).get<double>(), a.at(1).get<double>()}; };
    try {
        CalibrationReport r;
        r.k = {j.at("k1").get<double>(), j.at("k2").get<double>(), j.at("k3").get<double>()};
        r.model_order = j.value("model_order", 1);
        r.clamped = j.value("clamped", false);
        r.rmse = j.at("rmse").get<double>();
        r.rmse_x = j.at("rmse_x").get<double>();
        r.rmse_y = j.at("rmse_y").get<double>();
        r.rectified_rmse = j.value("rectified_rmse", 0.0);
        r.alpha = j.value("alpha", 0.0);
        r.grid.delta_a = j.at("delta_a").get<double>();
        r.grid.delta_b = j.at("delta_b").get<double>();
        r.grid.width = j.value("width", 0.0);
        r.grid.height = j.value("height", 0.0);
        const auto& c = j.at("corners");
        r.grid.top_left = pt(c.at("tl"));
        r.grid.top_right = pt(c.at("tr"));
        r.grid.bottom_left = pt(c.at("bl"));
        r.grid.bottom_right = pt(c.at("br"));
        r.grid.center = pt(j.at("center"));
        r.grid.grid = {pt(j.at("origin")), r.grid.delta_a, r.grid.delta_b, j.at("n").get<int>()};
        r.s_comm_est = j.at("s_comm_est").get<double>();
        r.c_calc_um = j.value("c_calc_um", 0.0);
        r.c_exp_model = j.value("c_exp_model", 0.0);
        r.c_exp = j.at("c_exp").get<double>();
        r.plateau = j.value("plateau", 0.0);
        r.background = j.value("background", 0.0);
        r.pilots_expected = j.value("pilots_expected", 0);
        r.pilots_detected = j.value("pilots_detected", 0);
        r.pilots_matched = j.value("pilots_matched", 0);
        if (j.contains("reference")) r.reference = {j["reference"].at(0).get<int>(), j["reference"].at(1).get<int>()};
        r.overlap_warning = j.value("overlap_warning", false);
        if (j.contains("pilots")) {
            for (const auto& p : j["pilots"]) {
                r.pilots.push_back({{p.at("i").get<int>(), p.at("j").get<int>()}, pt(p.at("observed")), pt(p.at("ideal"))});
            }
        }
        if (r.grid.grid.n < 2 || !(r.c_exp > 0.0)) fail(ErrorKind::Parse, "calibration report: invalid grid or C_exp");
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("calibration report: ") + e.what());
    }
}

}  // namespace ledvlc
