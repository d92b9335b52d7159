#pragma once

// Forward optical channel: blur superposition, radial distortion of spot
// centers, vignetting clipping and attenuation, additive noise, saturation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ledvlc/error.hpp"
#include "ledvlc/frame.hpp"
#include "ledvlc/optics.hpp"
#include "ledvlc/point.hpp"
#include "ledvlc/rng.hpp"

namespace ledvlc {

/// n x n OOK symbols. bits(i, j): i is the column (x), j the row (y).
class SymbolMatrix {
public:
    SymbolMatrix() = default;
    explicit SymbolMatrix(int n, std::uint8_t fill = 0) : n_(n) {
        if (n <= 0) fail(ErrorKind::InvalidParams, "symbol matrix side must be positive");
        bits_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), fill ? 1 : 0);
    }

    int n() const { return n_; }
    bool at(int i, int j) const { return bits_[index(i, j)] != 0; }
    void set(int i, int j, bool on) { bits_[index(i, j)] = on ? 1 : 0; }
    void set(LedIndex idx, bool on) { set(idx.i, idx.j, on); }
    bool at(LedIndex idx) const { return at(idx.i, idx.j); }

    int count_ones() const {
        int c = 0;
        for (auto b : bits_) c += b;
        return c;
    }
    double lighting_ratio() const { return static_cast<double>(count_ones()) / static_cast<double>(bits_.size()); }

    std::vector<LedIndex> active() const {
        std::vector<LedIndex> out;
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i)
                if (at(i, j)) out.push_back({i, j});
        return out;
    }

    friend bool operator==(const SymbolMatrix&, const SymbolMatrix&) = default;

private:
    std::size_t index(int i, int j) const {
        if (i < 0 || j < 0 || i >= n_ || j >= n_) fail(ErrorKind::InvalidParams, "symbol index out of range");
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i);
    }

    int n_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// 0/1 text grid, one row (fixed j) per line.
inline std::string to_text(const SymbolMatrix& m) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.n()) * (m.n() + 1));
    for (int j = 0; j < m.n(); ++j) {
        for (int i = 0; i < m.n(); ++i) out.push_back(m.at(i, j) ? '1' : '0');
        out.push_back('\n');
    }
    return out;
}

inline SymbolMatrix symbols_from_text(std::string_view text) {
    std::vector<std::string> rows;
    std::string line;
    std::istringstream in{std::string(text)};
    while (std::getline(in, line)) {
        std::string row;
        for (char c : line) {
            if (c == '0' || c == '1') row.push_back(c);
            else if (c != ' ' && c != '\t' && c != '\r') fail(ErrorKind::Parse, "symbol grid: unexpected character");
        }
        if (!row.empty()) rows.push_back(row);
    }
    if (rows.empty()) fail(ErrorKind::Parse, "symbol grid: empty");
    const int n = static_cast<int>(rows.size());
    SymbolMatrix m(n);
    for (int j = 0; j < n; ++j) {
        if (static_cast<int>(rows[j].size()) != n) fail(ErrorKind::Parse, "symbol grid: not square");
        for (int i = 0; i < n; ++i) m.set(i, j, rows[j][i] == '1');
    }
    return m;
}

/// Axis-aligned LED lattice: points(i, j) = origin + (i*delta_a, j*delta_b).
struct IdealGrid {
    Point2 origin{};
    double delta_a = 0.0;
    double delta_b = 0.0;
    int n = 0;

    Point2 point(int i, int j) const { return {origin.x + i * delta_a, origin.y + j * delta_b}; }
    Point2 point(LedIndex idx) const { return point(idx.i, idx.j); }

    std::vector<Point2> points() const {
        std::vector<Point2> out;
        out.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) out.push_back(point(i, j));
        return out;
    }

    Point2 center() const { return point(0, 0) + 0.5 * Point2{(n - 1) * delta_a, (n - 1) * delta_b}; }

    /// Grid of side n and spacing delta centered on `center`.
    static IdealGrid centered(Point2 center, double delta, int n) {
        const double half = 0.5 * (n - 1) * delta;
        return {{center.x - half, center.y - half}, delta, delta, n};
    }
};

struct NoiseModel {
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double saturation = 1.0;  ///< infinity disables the upper clip
};

enum class PsfProfile { Uniform, Feathered, GaussianTaper };

inline std::string_view to_string(PsfProfile p) {
    switch (p) {
        case PsfProfile::Uniform: return "uniform";
        case PsfProfile::Feathered: return "feathered";
        case PsfProfile::GaussianTaper: return "gaussian-taper";
    }
    return "feathered";
}

inline PsfProfile parse_psf_profile(std::string_view s) {
    if (s == "uniform") return PsfProfile::Uniform;
    if (s == "feathered") return PsfProfile::Feathered;
    if (s == "gaussian-taper") return PsfProfile::GaussianTaper;
    fail(ErrorKind::Parse, "unknown psf profile: " + std::string(s));
}

struct ChannelFlags {
    bool apply_distortion = true;
    bool apply_vignetting = false;
    PsfProfile psf_profile = PsfProfile::Feathered;
    double feather_px = 2.0;
    double gain = 0.8;  ///< single-spot plateau amplitude
};

/// Normalized spot profile h(d) for a disk of radius `radius`.
inline double psf_profile(double d, double radius, const ChannelFlags& flags) {
    if (d > radius) return 0.0;
    switch (flags.psf_profile) {
        case PsfProfile::Uniform:
            return 1.0;
        case PsfProfile::Feathered: {
            const double f = flags.feather_px;
            const double core = radius - f;
            if (d <= core || f <= 0.0) return 1.0;
            return 0.5 * (1.0 + std::cos(std::numbers::pi * (d - core) / f));
        }
        case PsfProfile::GaussianTaper: {
            const double core = radius - flags.feather_px;
            if (d <= core) return 1.0;
            const double sigma = std::max(flags.feather_px, 1e-9) / 2.0;
            const double t = (d - core) / sigma;
            return std::exp(-0.5 * t * t);
        }
    }
    return 0.0;
}

/// Pilots at every `stride`-th index in both directions.
inline SymbolMatrix pilot_pattern(int n, int stride) {
    if (n < 1 || stride < 1) fail(ErrorKind::InvalidPattern, "pilot_pattern: n and stride must be positive");
    if ((n - 1) % stride != 0) fail(ErrorKind::InvalidPattern, "pilot_pattern: (n-1) must be divisible by stride");
    SymbolMatrix m(n);
    for (int j = 0; j < n; j += stride)
        for (int i = 0; i < n; i += stride) m.set(i, j, true);
    return m;
}

/// True iff every pair of active pilots is farther apart than C.
inline bool check_pilot_spacing(const IdealGrid& grid, const SymbolMatrix& pattern, double c_px) {
    if (pattern.n() != grid.n) fail(ErrorKind::SizeMismatch, "check_pilot_spacing: pattern and grid sizes differ");
    const auto active = pattern.active();
    for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = a + 1; b < active.size(); ++b)
            if (!(distance(grid.point(active[a]), grid.point(active[b])) > c_px)) return false;
    return true;
}

/// Image-plane center of one LED after the optional distortion stage.
inline Point2 spot_center(const IdealGrid& grid, LedIndex idx, const CameraModel& camera, const ChannelFlags& flags) {
    const Point2 p = grid.point(idx);
    return flags.apply_distortion ? distort_point(p, camera) : p;
}

/// Adds one spot to `acc` (no noise, no clipping).
inline void accumulate_spot(std::vector<double>& acc, int width, int height, Point2 center, double c_px,
                            double amplitude, const ChannelFlags& flags) {
    const double radius = c_px / 2.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(center.x - radius)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(center.x + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(center.y - radius)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(center.y + radius)));
    for (int y = y0; y <= y1; ++y) {
        const double dy = y - center.y;
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - center.x;
            const double d = std::sqrt(dx * dx + dy * dy);
            if (d > radius) continue;
            acc[static_cast<std::size_t>(y) * width + x] += amplitude * psf_profile(d, radius, flags);
        }
    }
}

/// Renders the received frame for `symbols` on `grid`. Pixel (x, y) samples
/// the image plane at its integer center.
inline Frame render_frame(const SymbolMatrix& symbols, const IdealGrid& grid, const CameraModel& camera, double c_px,
                          const NoiseModel& noise, const ChannelFlags& flags) {
    if (camera.image_w <= 0 || camera.image_h <= 0) fail(ErrorKind::InvalidParams, "render_frame: frame dimensions must be positive");
    if (!(c_px >= 0.0)) fail(ErrorKind::InvalidParams, "render_frame: C must be non-negative");
    if (symbols.n() != grid.n) fail(ErrorKind::SizeMismatch, "render_frame: symbols and grid sizes differ");
    if (!(noise.sigma >= 0.0)) fail(ErrorKind::InvalidParams, "render_frame: sigma must be non-negative");

    Frame frame(camera.image_w, camera.image_h);
    auto& acc = frame.data();
    const int w = camera.image_w;
    const int h = camera.image_h;
    const Point2 pp = camera.principal_point();
    const double r_max_px = flags.apply_vignetting ? chief_ray_limits(camera).r_max_px : 0.0;

    if (c_px > 0.0) {
        for (const auto& idx : symbols.active()) {
            const Point2 c = spot_center(grid, idx, camera, flags);
            double amplitude = flags.gain;
            if (flags.apply_vignetting) amplitude *= visible_area_ratio(distance(c, pp), r_max_px, c_px);
            if (amplitude <= 0.0) continue;
            accumulate_spot(acc, w, h, c, c_px, amplitude, flags);
        }
    }

    if (flags.apply_vignetting) {
        const double limit2 = r_max_px * r_max_px;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (squared_norm(Point2{x - pp.x, y - pp.y}) > limit2) acc[static_cast<std::size_t>(y) * w + x] = 0.0;
    }

    const bool add_noise = noise.sigma > 0.0;
    for (std::size_t i = 0; i < acc.size(); ++i) {
        double v = acc[i];
        if (add_noise) v += noise.sigma * counter_normal(noise.seed, i);
        acc[i] = std::clamp(v, 0.0, noise.saturation);
    }
    return frame;
}

}  // namespace ledvlc
