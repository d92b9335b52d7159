#pragma once

// Geometric and radiometric formulas shared by the channel simulator and the
// receiver. Lengths: mm for focal/lens quantities, um for pixel pitch and
// blur diameters, m for link distances, pixels for image coordinates.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string_view>

#include "ledvlc/error.hpp"
#include "ledvlc/point.hpp"

namespace ledvlc {

struct DistortionParams {
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;

    /// 1 + k1 r^2 + k2 r^4 + k3 r^6 for a squared normalized radius.
    double factor(double r2) const { return 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3)); }

    bool is_zero() const { return k1 == 0.0 && k2 == 0.0 && k3 == 0.0; }
    bool finite() const { return std::isfinite(k1) && std::isfinite(k2) && std::isfinite(k3); }

    /// Conservative fitting bounds: k1 in [-10,10], k2 in [-50,50], k3 in [-200,200].
    bool within_bounds() const {
        return std::abs(k1) <= 10.0 && std::abs(k2) <= 50.0 && std::abs(k3) <= 200.0;
    }
    DistortionParams clamped() const {
        return {std::clamp(k1, -10.0, 10.0), std::clamp(k2, -50.0, 50.0), std::clamp(k3, -200.0, 200.0)};
    }

    friend bool operator==(const DistortionParams&, const DistortionParams&) = default;
};

struct CameraModel {
    double focal_mm = 30.0;
    double f_number = 1.8;
    double pixel_pitch_um = 10.0;
    double lens_length_mm = 90.0;
    double cx = 640.0;
    double cy = 512.0;
    int image_w = 1280;
    int image_h = 1024;
    DistortionParams distortion{};

    double aperture_mm() const { return focal_mm / f_number; }
    /// Focal length expressed in pixels; normalizes image radii.
    double focal_px() const { return focal_mm * 1000.0 / pixel_pitch_um; }
    Point2 principal_point() const { return {cx, cy}; }

    void validate() const {
        if (!(focal_mm > 0.0) || !(f_number > 0.0) || !(pixel_pitch_um > 0.0) || !(lens_length_mm > 0.0)) {
            fail(ErrorKind::Validation, "camera: f, F, P and L must be positive");
        }
        if (image_w <= 0 || image_h <= 0) fail(ErrorKind::Validation, "camera: resolution must be positive");
        if (!(cx >= 0.0 && cx < image_w && cy >= 0.0 && cy < image_h)) {
            fail(ErrorKind::Validation, "camera: principal point outside the sensor");
        }
        if (!distortion.finite()) fail(ErrorKind::Validation, "camera: distortion coefficients must be finite");
    }
};

struct LinkGeometry {
    int n = 16;
    double pitch_m = 0.03;
    double focus_m = 1.0;
    double comm_m = 6.0;
    double ref_spacing_px = 25.0;
    double ref_distance_m = 6.0;

    void validate(const CameraModel& camera) const {
        if (n < 2) fail(ErrorKind::Validation, "geometry: n must be at least 2");
        if (!(pitch_m > 0.0)) fail(ErrorKind::Validation, "geometry: pitch must be positive");
        if (!(focus_m * 1000.0 > camera.focal_mm)) fail(ErrorKind::Validation, "geometry: focus distance must exceed f");
        if (!(comm_m > 0.0)) fail(ErrorKind::Validation, "geometry: communication distance must be positive");
        if (!(ref_spacing_px > 0.0) || !(ref_distance_m > 0.0)) {
            fail(ErrorKind::Validation, "geometry: reference spacing and distance must be positive");
        }
    }
};

enum class IsiDegree { Degree1, Degree2, Degree3, Beyond };

inline std::string_view to_string(IsiDegree d) {
    switch (d) {
        case IsiDegree::Degree1: return "degree1";
        case IsiDegree::Degree2: return "degree2";
        case IsiDegree::Degree3: return "degree3";
        case IsiDegree::Beyond: return "beyond";
    }
    return "beyond";
}

/// Pixels between adjacent LED images: (f/P) * (pitch/s').
inline double pixel_scale(const CameraModel& camera, const LinkGeometry& geometry) {
    if (!(geometry.comm_m > 0.0)) fail(ErrorKind::InvalidGeometry, "pixel_scale: communication distance must be positive");
    if (!(geometry.pitch_m > 0.0)) fail(ErrorKind::InvalidGeometry, "pixel_scale: LED pitch must be positive");
    return camera.focal_px() * (geometry.pitch_m / geometry.comm_m);
}

inline double normalized_radius_sq(Point2 p, const CameraModel& camera) {
    const double fpx = camera.focal_px();
    const double u = (p.x - camera.cx) / fpx;
    const double v = (p.y - camera.cy) / fpx;
    return u * u + v * v;
}

/// Forward radial distortion: ideal -> observed pixel coordinates.
inline Point2 distort_point(Point2 p, const CameraModel& camera) {
    const double s = camera.distortion.factor(normalized_radius_sq(p, camera));
    return {camera.cx + (p.x - camera.cx) * s, camera.cy + (p.y - camera.cy) * s};
}

/// Inverse radial distortion. refine_iters = 0 is the first-order inverse
/// (polynomial evaluated at the distorted radius). Each extra iteration is a
/// Newton step on r s(r) = r_d at the current undistorted estimate; plain
/// fixed-point updates contract too slowly near r = 0.3 for k1 around -2.8.
inline Point2 undistort_point(Point2 observed, const CameraModel& camera, int refine_iters = 3) {
    if (refine_iters < 0) fail(ErrorKind::InvalidParams, "undistort_point: refine_iters must be >= 0");
    const auto& k = camera.distortion;
    const Point2 c = camera.principal_point();
    const double rd = std::sqrt(normalized_radius_sq(observed, camera));
    if (rd == 0.0) return observed;

    const double s0 = k.factor(rd * rd);
    if (!(s0 > 0.0)) fail(ErrorKind::DegenerateDistortion, "undistort_point: distortion factor is not positive");
    double r = rd / s0;
    for (int it = 0; it < refine_iters; ++it) {
        const double r2 = r * r;
        const double s = k.factor(r2);
        // d/dr of r s(r)
        const double slope = 1.0 + r2 * (3.0 * k.k1 + r2 * (5.0 * k.k2 + r2 * 7.0 * k.k3));
        if (!(s > 0.0) || !(slope > 0.0)) {
            fail(ErrorKind::DegenerateDistortion, "undistort_point: distortion map is not invertible here");
        }
        r -= (r * s - rd) / slope;
    }
    return c + (r / rd) * (observed - c);
}

struct BlurDiameter {
    double calc_um = 0.0;
    double expected_px = 0.0;
};

/// Defocus blur: C = D f |s - s'| / (s' (s - f)), C_exp = round(k C / P).
inline BlurDiameter blur_diameter(const CameraModel& camera, double focus_m, double comm_m, double k_corr = 1.3) {
    const double f_um = camera.focal_mm * 1000.0;
    const double s_um = focus_m * 1e6;
    const double sc_um = comm_m * 1e6;
    if (!(s_um > f_um)) fail(ErrorKind::InvalidFocus, "blur_diameter: focus distance must exceed focal length");
    if (!(sc_um > 0.0)) fail(ErrorKind::InvalidGeometry, "blur_diameter: communication distance must be positive");
    const double aperture_um = f_um / camera.f_number;
    BlurDiameter out;
    out.calc_um = aperture_um * f_um * std::abs(s_um - sc_um) / (sc_um * (s_um - f_um));
    out.expected_px = std::round(k_corr * out.calc_um / camera.pixel_pitch_um);
    return out;
}

struct ChiefRayLimits {
    double theta_max_deg = 0.0;
    double r_max_mm = 0.0;
    double r_max_px = 0.0;
};

inline ChiefRayLimits chief_ray_limits(const CameraModel& camera) {
    if (!(camera.lens_length_mm > 0.0)) fail(ErrorKind::InvalidGeometry, "chief_ray_limits: lens length must be positive");
    const double d = camera.aperture_mm();
    const double theta = std::atan(d / (2.0 * camera.lens_length_mm));
    ChiefRayLimits out;
    out.theta_max_deg = theta * 180.0 / std::numbers::pi;
    out.r_max_mm = camera.focal_mm * std::tan(theta);
    out.r_max_px = out.r_max_mm * 1000.0 / camera.pixel_pitch_um;
    return out;
}

/// Fraction of a blur disk of diameter C still visible when its center lies
/// r_px from the principal point and the unvignetted radius is r_max_px.
inline double visible_area_ratio(double r_px, double r_max_px, double c_px) {
    if (!(c_px > 0.0)) fail(ErrorKind::InvalidParams, "visible_area_ratio: C must be positive");
    const double excess = r_px - r_max_px;
    const double radius = c_px / 2.0;
    if (excess <= 0.0) return 1.0;
    if (excess >= radius) return 0.0;
    const double r2 = radius * radius;
    const double crescent = r2 * std::acos(excess / radius) - excess * std::sqrt(r2 - excess * excess);
    return crescent / (std::numbers::pi * r2);
}

/// Visible-area levels keyed by radius breakpoints.
inline int vignetting_level(double r_px) {
    if (r_px < 278.0) return 0;
    if (r_px <= 290.0) return 1;
    if (r_px <= 308.0) return 2;
    return 3;
}

/// Ties go to the higher-interference degree.
inline IsiDegree isi_degree(double delta_a, double c_px) {
    if (!(delta_a > 0.0) || !(c_px >= 0.0)) fail(ErrorKind::InvalidParams, "isi_degree: delta_a > 0 and C >= 0 required");
    const double g = delta_a - c_px / 2.0;
    if (g > 0.0) return IsiDegree::Degree1;
    if (g > -delta_a) return IsiDegree::Degree2;
    if (g > -2.0 * delta_a) return IsiDegree::Degree3;
    return IsiDegree::Beyond;
}

/// s' = (reference spacing / observed spacing) * reference distance.
inline double infer_distance(double delta_a_obs, const LinkGeometry& geometry) {
    if (!(delta_a_obs > 0.0)) fail(ErrorKind::InvalidGeometry, "infer_distance: observed spacing must be positive");
    return geometry.ref_spacing_px / delta_a_obs * geometry.ref_distance_m;
}

}  // namespace ledvlc
