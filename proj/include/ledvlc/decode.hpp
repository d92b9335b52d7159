#pragma once

// Information phase: Hough candidates -> vignetting sector filter -> PSF
// radius constraint -> rectification -> grid alignment. Also the
// intensity-threshold baseline and the quarter-density comparison decoder.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ledvlc/calibrate.hpp"
#include "ledvlc/channel.hpp"
#include "ledvlc/error.hpp"
#include "ledvlc/frame.hpp"
#include "ledvlc/hough.hpp"
#include "ledvlc/optics.hpp"
#include "ledvlc/sectors.hpp"

namespace ledvlc {

enum class Decoder { Proposed, Baseline, LowDensity, ProposedNoAlignment };

inline std::string_view to_string(Decoder d) {
    switch (d) {
        case Decoder::Proposed: return "proposed";
        case Decoder::Baseline: return "baseline";
        case Decoder::LowDensity: return "lowdensity";
        case Decoder::ProposedNoAlignment: return "proposed_no_alignment";
    }
    return "proposed";
}

inline Decoder parse_decoder(std::string_view s) {
    if (s == "proposed") return Decoder::Proposed;
    if (s == "baseline") return Decoder::Baseline;
    if (s == "lowdensity") return Decoder::LowDensity;
    if (s == "proposed_no_alignment") return Decoder::ProposedNoAlignment;
    fail(ErrorKind::Parse, "unknown decoder: " + std::string(s));
}

struct DecodeParams {
    double epsilon = 0.04;
    double theta = 0.35;
    double gamma = 0.0;             ///< <= 0: midpoint of calibrated background and plateau
    double sector_threshold = 0.0;  ///< <= 0: half the calibrated plateau
    double center_dist_frac = 0.5;  ///< Hough NMS distance as a fraction of the grid step
    int refine_iters = 3;
    HoughParams hough{};

    void validate() const {
        if (!(theta > 0.0 && theta < 0.5)) fail(ErrorKind::Validation, "decode: theta must be in (0, 0.5)");
        if (!(epsilon > 0.0)) fail(ErrorKind::Validation, "decode: epsilon must be positive");
        if (gamma > 0.0 && !(gamma < 1.0)) fail(ErrorKind::Validation, "decode: gamma must be in (0,1)");
        if (sector_threshold > 0.0 && !(sector_threshold < 1.0)) fail(ErrorKind::Validation, "decode: sector_threshold must be in (0,1)");
        if (!(center_dist_frac >= 0.0)) fail(ErrorKind::Validation, "decode: center_dist_frac must be non-negative");
        if (refine_iters < 0) fail(ErrorKind::Validation, "decode: refine_iters must be >= 0");
    }

    double gamma_for(const CalibrationReport& cal) const {
        return gamma > 0.0 ? gamma : 0.5 * (cal.background + cal.plateau);
    }
    double sector_threshold_for(const CalibrationReport& cal) const {
        return sector_threshold > 0.0 ? sector_threshold : 0.5 * cal.plateau;
    }
};

struct DecodeReport {
    SymbolMatrix symbols;
    Decoder decoder = Decoder::Proposed;
    int candidates_total = 0;
    int candidates_after_vignetting = 0;
    int candidates_after_psf = 0;
    int matched = 0;
    /// Detected-ones count: set bits, or every validated center when alignment is off.
    int detections = 0;
    std::vector<Point2> unmatched_valid_centers;
};

// ---------------------------------------------------------------------------

/// Centers inside r_max pass; the rest need a lit inward half.
inline std::vector<Circle> vignetting_filter(const std::vector<Circle>& circles, const Frame& frame,
                                             const CameraModel& camera, double r_max_px, double sector_threshold) {
    std::vector<Circle> out;
    const Point2 pp = camera.principal_point();
    for (const auto& c : circles) {
        const Point2 rel = Point2{c.a, c.b} - pp;
        if (norm(rel) <= r_max_px) {
            out.push_back(c);
            continue;
        }
        const int l = sector_of(std::atan2(rel.y, rel.x));
        const auto means = sector_means(frame, c);
        double acc = 0.0;
        for (int s : opposite_sectors(l)) acc += means[s];
        if (acc / 6.0 >= sector_threshold) out.push_back(c);
    }
    return out;
}

/// Keeps circles with |R - C_exp/2| <= epsilon * C_exp.
inline std::vector<Circle> psf_constrain(const std::vector<Circle>& circles, double c_exp, double epsilon) {
    if (!(c_exp > 0.0)) fail(ErrorKind::InvalidParams, "psf_constrain: C_exp must be positive");
    std::vector<Circle> out;
    for (const auto& c : circles)
        if (std::abs(c.r - c_exp / 2.0) <= epsilon * c_exp) out.push_back(c);
    return out;
}

/// Nearest grid index to a point (clamped to the grid).
inline LedIndex nearest_index(const IdealGrid& grid, Point2 p) {
    auto idx = [&](double v, double o, double d) {
        return std::clamp(static_cast<int>(std::lround((v - o) / d)), 0, grid.n - 1);
    };
    return {idx(p.x, grid.origin.x, grid.delta_a), idx(p.y, grid.origin.y, grid.delta_b)};
}

/// Each center sets at most one bit: its nearest grid point, and only when
/// it lies strictly inside theta * delta on both axes.
inline DecodeReport align_centers(const std::vector<Point2>& centers, const IdealGrid& grid, double theta) {
    if (!(theta > 0.0 && theta < 0.5)) fail(ErrorKind::InvalidParams, "align_centers: theta must be in (0, 0.5)");
    if (grid.n < 1) fail(ErrorKind::InvalidParams, "align_centers: empty grid");
    DecodeReport rep;
    rep.symbols = SymbolMatrix(grid.n);
    for (const auto& p : centers) {
        const LedIndex idx = nearest_index(grid, p);
        const Point2 g = grid.point(idx);
        if (std::abs(p.x - g.x) < theta * grid.delta_a && std::abs(p.y - g.y) < theta * grid.delta_b) {
            rep.symbols.set(idx, true);
            ++rep.matched;
        } else {
            rep.unmatched_valid_centers.push_back(p);
        }
    }
    rep.detections = rep.symbols.count_ones();
    return rep;
}

// ---------------------------------------------------------------------------
// Intensity-threshold decoders

/// Mean intensity over the disk of diameter C centered at p.
inline double disk_mean(const Frame& frame, Point2 p, double c_px) {
    const double r = c_px / 2.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(p.x - r)));
    const int x1 = std::min(frame.width() - 1, static_cast<int>(std::ceil(p.x + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(p.y - r)));
    const int y1 = std::min(frame.height() - 1, static_cast<int>(std::ceil(p.y + r)));
    double s = 0.0;
    int n = 0;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if ((x - p.x) * (x - p.x) + (y - p.y) * (y - p.y) <= r * r) {
                s += frame.at(x, y);
                ++n;
            }
    return n ? s / n : 0.0;
}

/// t(i,j) = 1 iff the mean over B_C(a_i, b_j) exceeds gamma. Sample points
/// are mapped through `camera`'s distortion (pass zero K for none).
inline SymbolMatrix baseline_threshold_decode(const Frame& frame, const IdealGrid& grid, double c_px, double gamma,
                                              const CameraModel* camera = nullptr) {
    if (!(c_px > 0.0)) fail(ErrorKind::InvalidParams, "baseline decode: C must be positive");
    SymbolMatrix out(grid.n);
    for (int j = 0; j < grid.n; ++j) {
        for (int i = 0; i < grid.n; ++i) {
            Point2 p = grid.point(i, j);
            if (camera) p = distort_point(p, *camera);
            out.set(i, j, disk_mean(frame, p, c_px) > gamma);
        }
    }
    return out;
}

/// Indices carrying data in the quarter-density layout.
inline int lowdensity_side(int n) { return (n + 1) / 2; }

inline SymbolMatrix lowdensity_decode(const Frame& frame, const IdealGrid& grid, double c_px, double gamma,
                                      const CameraModel* camera = nullptr) {
    const IdealGrid sub{grid.origin, 2.0 * grid.delta_a, 2.0 * grid.delta_b, lowdensity_side(grid.n)};
    return baseline_threshold_decode(frame, sub, c_px, gamma, camera);
}

/// Embeds an m x m subgrid payload into the full n x n transmit matrix.
inline SymbolMatrix expand_lowdensity(const SymbolMatrix& sub, int n) {
    SymbolMatrix full(n);
    for (int j = 0; j < sub.n(); ++j)
        for (int i = 0; i < sub.n(); ++i)
            if (sub.at(i, j)) full.set(2 * i, 2 * j, true);
    return full;
}

// ---------------------------------------------------------------------------

inline HoughParams decode_hough_params(const CalibrationReport& cal, const DecodeParams& params) {
    HoughParams hp = params.hough;
    const double r0 = cal.c_exp / 2.0;
    hp.r_min = std::max(1.0, r0 * (1.0 - 2.0 * params.epsilon));
    hp.r_max = r0 * (1.0 + 2.0 * params.epsilon);
    hp.min_center_dist = params.center_dist_frac * std::min(cal.grid.delta_a, cal.grid.delta_b);
    return hp;
}

inline DecodeReport decode_frame(const Frame& frame, const CalibrationReport& cal, const CameraModel& camera,
                                 const DecodeParams& params, Decoder decoder = Decoder::Proposed) {
    params.validate();
    CameraModel cam = camera;
    cam.distortion = cal.k;
    const IdealGrid& grid = cal.grid.grid;

    if (decoder == Decoder::Baseline || decoder == Decoder::LowDensity) {
        DecodeReport rep;
        rep.decoder = decoder;
        const double gamma = params.gamma_for(cal);
        rep.symbols = decoder == Decoder::Baseline ? baseline_threshold_decode(frame, grid, cal.c_exp, gamma, &cam)
                                                   : lowdensity_decode(frame, grid, cal.c_exp, gamma, &cam);
        rep.detections = rep.symbols.count_ones();
        return rep;
    }

    const auto candidates = detail::staged("hough", [&] { return hough_circles(frame, decode_hough_params(cal, params)); });
    const double r_max_px = chief_ray_limits(cam).r_max_px;
    const auto visible = vignetting_filter(candidates, frame, cam, r_max_px, params.sector_threshold_for(cal));
    const auto valid = psf_constrain(visible, cal.c_exp, params.epsilon);

    std::vector<Point2> centers;
    for (const auto& c : valid) centers.push_back(detail::staged("rectify", [&] { return undistort_point({c.a, c.b}, cam, params.refine_iters); }));

    DecodeReport rep;
    if (decoder == Decoder::Proposed) {
        rep = align_centers(centers, grid, params.theta);
    } else {
        rep.symbols = SymbolMatrix(grid.n);
        for (const auto& p : centers) rep.symbols.set(nearest_index(grid, p), true);
        rep.matched = static_cast<int>(centers.size());
        rep.detections = static_cast<int>(centers.size());
    }
    rep.decoder = decoder;
    rep.candidates_total = static_cast<int>(candidates.size());
    rep.candidates_after_vignetting = static_cast<int>(visible.size());
    rep.candidates_after_psf = static_cast<int>(valid.size());
    return rep;
}

inline nlohmann::json to_json(const DecodeReport& r) {
    nlohmann::json j;
    j["decoder"] = std::string(to_string(r.decoder));
    j["n"] = r.symbols.n();
    j["symbols"] = to_text(r.symbols);
    j["ones"] = r.symbols.count_ones();
    j["detections"] = r.detections;
    j["candidates_total"] = r.candidates_total;
    j["candidates_after_vignetting"] = r.candidates_after_vignetting;
    j["candidates_after_psf"] = r.candidates_after_psf;
    j["matched"] = r.matched;
    auto um = nlohmann::json::array();
    for (const auto& p : r.unmatched_valid_centers) um.push_back({p.x, p.y});
    j["unmatched_valid_centers"] = std::move(um);
    return j;
}

}  // namespace ledvlc
