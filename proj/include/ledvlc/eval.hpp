#pragma once

// Link metrics and the seeded experiment runner.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ledvlc/calibrate.hpp"
#include "ledvlc/channel.hpp"
#include "ledvlc/decode.hpp"
#include "ledvlc/error.hpp"
#include "ledvlc/rng.hpp"

namespace ledvlc {

// ---------------------------------------------------------------------------
// Metrics

/// Detected ones minus transmitted ones.
inline int den(const SymbolMatrix& decoded, const SymbolMatrix& truth) {
    if (decoded.n() != truth.n()) fail(ErrorKind::SizeMismatch, "den: matrix sizes differ");
    return decoded.count_ones() - truth.count_ones();
}

inline int hamming_errors(const SymbolMatrix& decoded, const SymbolMatrix& truth) {
    if (decoded.n() != truth.n()) fail(ErrorKind::SizeMismatch, "hamming: matrix sizes differ");
    int e = 0;
    for (int j = 0; j < truth.n(); ++j)
        for (int i = 0; i < truth.n(); ++i) e += decoded.at(i, j) != truth.at(i, j);
    return e;
}

enum class BerMode { Paper, Hamming };

/// Paper: |DEN| / transmitted ones. Hamming: mismatched bit fraction.
inline double ber(const SymbolMatrix& decoded, const SymbolMatrix& truth, BerMode mode) {
    if (mode == BerMode::Hamming) {
        const double total = static_cast<double>(truth.n()) * truth.n();
        return hamming_errors(decoded, truth) / total;
    }
    const int ones = truth.count_ones();
    if (ones == 0) fail(ErrorKind::UndefinedBer, "ber: |DEN|-based BER needs at least one transmitted one");
    return std::abs(den(decoded, truth)) / static_cast<double>(ones);
}

struct FrameResult {
    int den = 0;
    double ber_paper = std::numeric_limits<double>::quiet_NaN();  ///< NaN when nothing was sent
    double ber_hamming = 0.0;
    int n_actual = 0;
    int n_detected = 0;
    double lighting_ratio = 0.0;
    int payload_bits = 0;
    int correct_bits = 0;
};

/// n_detected comes from the decoder's detection count, which equals the
/// number of set bits except in the no-alignment ablation.
inline FrameResult frame_result(const DecodeReport& report, const SymbolMatrix& truth) {
    if (report.symbols.n() != truth.n()) fail(ErrorKind::SizeMismatch, "frame_result: matrix sizes differ");
    FrameResult r;
    r.n_actual = truth.count_ones();
    r.n_detected = report.detections;
    r.den = r.n_detected - r.n_actual;
    if (r.n_actual > 0) r.ber_paper = std::abs(r.den) / static_cast<double>(r.n_actual);
    const int errors = hamming_errors(report.symbols, truth);
    r.payload_bits = truth.n() * truth.n();
    r.correct_bits = r.payload_bits - errors;
    r.ber_hamming = static_cast<double>(errors) / r.payload_bits;
    r.lighting_ratio = truth.lighting_ratio();
    return r;
}

/// Correctly decoded bits per minute.
inline double throughput(const std::vector<FrameResult>& results, double frame_rate) {
    if (!(frame_rate > 0.0)) fail(ErrorKind::InvalidParams, "throughput: frame rate must be positive");
    if (results.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : results) sum += r.correct_bits;
    return 60.0 * frame_rate * sum / static_cast<double>(results.size());
}

// ---------------------------------------------------------------------------
// Pattern generation

/// Number of other active centers strictly inside each active LED's blur disk.
inline int max_overlap_count(const SymbolMatrix& pattern, const IdealGrid& grid, double c_px) {
    const auto active = pattern.active();
    const double r = c_px / 2.0;
    int worst = 0;
    for (std::size_t a = 0; a < active.size(); ++a) {
        int count = 0;
        for (std::size_t b = 0; b < active.size(); ++b)
            if (a != b && distance(grid.point(active[a]), grid.point(active[b])) < r) ++count;
        worst = std::max(worst, count);
    }
    return worst;
}

/// Uniform random pattern with round(ratio * n^2) ones, resampled until no
/// LED's blur disk contains more than `max_overlaps` other active centers
/// (negative disables the constraint).
inline SymbolMatrix gen_pattern(int n, double lighting_ratio, int max_overlaps, double c_px, const IdealGrid& grid,
                                std::uint64_t seed, int attempt_budget = 10000) {
    if (n < 1) fail(ErrorKind::InvalidParams, "gen_pattern: n must be positive");
    if (!(lighting_ratio >= 0.0 && lighting_ratio <= 1.0)) fail(ErrorKind::InvalidParams, "gen_pattern: ratio must be in [0,1]");
    const int total = n * n;
    const int ones = static_cast<int>(std::lround(lighting_ratio * total));
    Rng rng(seed);
    std::vector<int> cells(total);
    for (int attempt = 0; attempt < attempt_budget; ++attempt) {
        for (int k = 0; k < total; ++k) cells[k] = k;
        SymbolMatrix m(n);
        for (int k = 0; k < ones; ++k) {
            const int pick = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(total - k)));
            std::swap(cells[k], cells[pick]);
            m.set(cells[k] % n, cells[k] / n, true);
        }
        if (max_overlaps < 0 || max_overlap_count(m, grid, c_px) <= max_overlaps) return m;
    }
    fail(ErrorKind::ConstraintInfeasible, "gen_pattern: overlap constraint not met within the attempt budget");
}

// ---------------------------------------------------------------------------
// Scenes and sweeps

/// Everything needed to simulate one link and run its receiver.
struct Scene {
    std::string name = "scene";
    CameraModel camera{};        ///< true optics, including the lens distortion
    LinkGeometry geometry{};
    double delta_px = 22.0;      ///< true LED image spacing
    double spot_c_px = 54.0;     ///< rendered blur diameter
    Point2 grid_center{643.3, 509.9};
    ChannelFlags flags{};
    NoiseModel noise{};
    CalibrationConfig calibration{};
    DecodeParams decode{};

    IdealGrid truth_grid() const { return IdealGrid::centered(grid_center, delta_px, geometry.n); }

    /// Intrinsics known to the receiver: everything except the distortion.
    CameraModel receiver_camera() const {
        CameraModel c = camera;
        c.distortion = {};
        return c;
    }

    Frame render(const SymbolMatrix& symbols, std::uint64_t noise_seed) const {
        NoiseModel nm = noise;
        nm.seed = noise_seed;
        return render_frame(symbols, truth_grid(), camera, spot_c_px, nm, flags);
    }

    CalibrationReport calibrate(std::uint64_t noise_seed) const {
        const Frame pilot = render(pilot_pattern(geometry.n, calibration.pilot_stride), noise_seed);
        return calibrate_pilot_frame(pilot, receiver_camera(), geometry, calibration);
    }

    void validate() const {
        camera.validate();
        geometry.validate(camera);
        calibration.validate();
        decode.validate();
        if (!(delta_px > 0.0) || !(spot_c_px > 0.0)) fail(ErrorKind::Validation, "scene: spacing and spot diameter must be positive");
        if (flags.feather_px < 0.0 || !(flags.feather_px < spot_c_px / 2.0)) fail(ErrorKind::Validation, "scene: feather must be in [0, C/2)");
        if (!(noise.sigma >= 0.0)) fail(ErrorKind::Validation, "scene: sigma must be non-negative");
        if (!(flags.gain > 0.0)) fail(ErrorKind::Validation, "scene: gain must be positive");
    }
};

struct SweepSpec {
    std::vector<std::string> isi_degrees{"degree2"};
    std::vector<double> lighting_ratios{0.3};
    std::vector<double> epsilons{0.04};
    int frames_per_point = 20;
    std::uint64_t seed = 1;
    std::vector<Decoder> decoders{Decoder::Proposed};
    int max_overlaps = -1;
    double frame_rate = 1000.0;
    double sigma = -1.0;  ///< >= 0 overrides every scene's noise level

    void validate() const {
        if (frames_per_point < 1) fail(ErrorKind::Validation, "sweep: frames_per_point must be >= 1");
        if (isi_degrees.empty() || lighting_ratios.empty() || epsilons.empty() || decoders.empty()) {
            fail(ErrorKind::Validation, "sweep: every axis needs at least one value");
        }
        for (double r : lighting_ratios)
            if (!(r >= 0.0 && r <= 1.0)) fail(ErrorKind::Validation, "sweep: lighting ratios must be in [0,1]");
        for (double e : epsilons)
            if (!(e > 0.0)) fail(ErrorKind::Validation, "sweep: epsilons must be positive");
        if (!(frame_rate > 0.0)) fail(ErrorKind::Validation, "sweep: frame_rate must be positive");
    }
};

struct SweepCell {
    std::string degree;
    double ratio = 0.0;
    double epsilon = 0.0;
    Decoder decoder = Decoder::Proposed;
    bool failed = false;
    std::string error;
    int frames = 0;
    double ber_paper = 0.0;
    double ber_hamming = 0.0;
    double den_mean = 0.0;
    double throughput_bpm = 0.0;
    std::vector<FrameResult> results;
};

struct SweepResult {
    std::vector<SweepCell> cells;
};

namespace detail {

enum : std::uint64_t { kPilotStream = 1, kPatternStream = 2, kNoiseStream = 3, kLowPatternStream = 4, kLowNoiseStream = 5 };

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return hash_key(hash_key(seed, stream, a), b, c + 1);
}

inline void finish_cell(SweepCell& cell, double frame_rate) {
    if (cell.failed || cell.results.empty()) {
        cell.failed = true;
        return;
    }
    double bp = 0.0, bh = 0.0, dn = 0.0;
    int bp_n = 0;
    for (const auto& r : cell.results) {
        if (!std::isnan(r.ber_paper)) {
            bp += r.ber_paper;
            ++bp_n;
        }
        bh += r.ber_hamming;
        dn += r.den;
    }
    const double n = static_cast<double>(cell.results.size());
    cell.frames = static_cast<int>(cell.results.size());
    cell.ber_paper = bp_n ? bp / bp_n : std::numeric_limits<double>::quiet_NaN();
    cell.ber_hamming = bh / n;
    cell.den_mean = dn / n;
    cell.throughput_bpm = throughput(cell.results, frame_rate);
}

}  // namespace detail

/// Runs every (degree, ratio, epsilon, decoder) cell. Frames for a given
/// (degree, ratio, frame index) are shared by all epsilons and decoders of
/// that family, so comparisons see common random patterns and noise.
inline SweepResult run_sweep(const SweepSpec& spec, const std::vector<Scene>& scenes) {
    spec.validate();
    if (scenes.size() != spec.isi_degrees.size()) fail(ErrorKind::Validation, "sweep: one scene per degree required");

    bool want_full = false, want_low = false;
    for (auto d : spec.decoders) (d == Decoder::LowDensity ? want_low : want_full) = true;

    SweepResult out;
    for (std::size_t di = 0; di < scenes.size(); ++di) {
        Scene scene = scenes[di];
        if (spec.sigma >= 0.0) scene.noise.sigma = spec.sigma;

        std::optional<CalibrationReport> cal;
        std::string cal_error;
        try {
            scene.validate();
            cal = scene.calibrate(detail::stream_seed(spec.seed, detail::kPilotStream, di, 0, 0));
        } catch (const Error& e) {
            cal_error = std::string("calibration ") + (e.stage().empty() ? "" : e.stage() + ": ") + e.what();
        }

        const IdealGrid truth_grid = scene.truth_grid();
        const IdealGrid sub_grid{truth_grid.origin, 2 * truth_grid.delta_a, 2 * truth_grid.delta_b, lowdensity_side(truth_grid.n)};

        for (std::size_t ri = 0; ri < spec.lighting_ratios.size(); ++ri) {
            const double ratio = spec.lighting_ratios[ri];
            std::vector<SweepCell> block;
            for (double eps : spec.epsilons) {
                for (auto dec : spec.decoders) {
                    SweepCell cell;
                    cell.degree = spec.isi_degrees[di];
                    cell.ratio = ratio;
                    cell.epsilon = eps;
                    cell.decoder = dec;
                    if (!cal) {
                        cell.failed = true;
                        cell.error = cal_error;
                    }
                    block.push_back(std::move(cell));
                }
            }

            if (cal) {
                for (int f = 0; f < spec.frames_per_point; ++f) {
                    std::optional<SymbolMatrix> truth, low_truth;
                    std::optional<Frame> frame, low_frame;
                    std::string frame_error;
                    try {
                        if (want_full) {
                            truth = gen_pattern(truth_grid.n, ratio, spec.max_overlaps, scene.spot_c_px, truth_grid,
                                                detail::stream_seed(spec.seed, detail::kPatternStream, di, ri, f));
                            frame = scene.render(*truth, detail::stream_seed(spec.seed, detail::kNoiseStream, di, ri, f));
                        }
                        if (want_low) {
                            low_truth = gen_pattern(sub_grid.n, ratio, spec.max_overlaps, scene.spot_c_px, sub_grid,
                                                    detail::stream_seed(spec.seed, detail::kLowPatternStream, di, ri, f));
                            low_frame = scene.render(expand_lowdensity(*low_truth, truth_grid.n),
                                                     detail::stream_seed(spec.seed, detail::kLowNoiseStream, di, ri, f));
                        }
                    } catch (const Error& e) {
                        frame_error = e.what();
                    }

                    for (auto& cell : block) {
                        if (cell.failed) continue;
                        if (!frame_error.empty()) {
                            cell.failed = true;
                            cell.error = frame_error;
                            continue;
                        }
                        try {
                            DecodeParams dp = scene.decode;
                            dp.epsilon = cell.epsilon;
                            const bool low = cell.decoder == Decoder::LowDensity;
                            const auto rep = decode_frame(low ? *low_frame : *frame, *cal, scene.receiver_camera(), dp, cell.decoder);
                            cell.results.push_back(frame_result(rep, low ? *low_truth : *truth));
                        } catch (const Error& e) {
                            cell.failed = true;
                            cell.error = e.what();
                        }
                    }
                }
            }
            for (auto& cell : block) {
                detail::finish_cell(cell, spec.frame_rate);
                out.cells.push_back(std::move(cell));
            }
        }
    }
    return out;
}

inline constexpr const char* kSweepCsvHeader = "degree,ratio,epsilon,decoder,ber_paper,ber_hamming,den_mean,throughput_bpm";

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

inline std::string to_csv(const SweepResult& result) {
    std::string out = std::string(kSweepCsvHeader) + "\n";
    for (const auto& c : result.cells) {
        out += c.degree + "," + format_number(c.ratio) + "," + format_number(c.epsilon) + "," + std::string(to_string(c.decoder)) + ",";
        if (c.failed) {
            out += "nan,nan,nan,nan\n";
            continue;
        }
        out += format_number(c.ber_paper) + "," + format_number(c.ber_hamming) + "," + format_number(c.den_mean) + "," +
               format_number(c.throughput_bpm) + "\n";
    }
    return out;
}

inline nlohmann::json to_json(const SweepSpec& spec) {
    nlohmann::json j;
    j["degrees"] = spec.isi_degrees;
    j["ratios"] = spec.lighting_ratios;
    j["epsilons"] = spec.epsilons;
    j["frames_per_point"] = spec.frames_per_point;
    j["seed"] = spec.seed;
    auto decs = nlohmann::json::array();
    for (auto d : spec.decoders) decs.push_back(std::string(to_string(d)));
    j["decoders"] = decs;
    j["max_overlaps"] = spec.max_overlaps;
    j["frame_rate"] = spec.frame_rate;
    j["sigma"] = spec.sigma;
    return j;
}

inline nlohmann::json to_json(const SweepResult& result, const SweepSpec& spec) {
    auto num = [](double v) { return std::isnan(v) ? nlohmann::json() : nlohmann::json(v); };
    nlohmann::json j;
    j["spec"] = to_json(spec);
    auto cells = nlohmann::json::array();
    int failed = 0;
    for (const auto& c : result.cells) {
        failed += c.failed;
        nlohmann::json cj{{"degree", c.degree},
                          {"ratio", c.ratio},
                          {"epsilon", c.epsilon},
                          {"decoder", std::string(to_string(c.decoder))},
                          {"frames", c.frames},
                          {"failed", c.failed}};
        if (c.failed) {
            cj["error"] = c.error;
        } else {
            cj["ber_paper"] = num(c.ber_paper);
            cj["ber_hamming"] = c.ber_hamming;
            cj["den_mean"] = c.den_mean;
            cj["throughput_bpm"] = c.throughput_bpm;
        }
        cells.push_back(std::move(cj));
    }
    j["cells"] = std::move(cells);
    j["failed_cells"] = failed;
    return j;
}

}  // namespace ledvlc
