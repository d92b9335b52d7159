#pragma once

// Plain-text configuration: `key = value` lines under `[section]` headers,
// `#` comments. Values override a named preset scene.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ledvlc/eval.hpp"

namespace ledvlc {

using KeyValues = std::map<std::string, std::string>;  // "section.key" -> value

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline KeyValues parse_key_values(std::string_view text) {
    KeyValues kv;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(ErrorKind::Parse, "config line " + std::to_string(line_no) + ": unterminated section");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorKind::Parse, "config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) fail(ErrorKind::Parse, "config line " + std::to_string(line_no) + ": empty key");
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) fail(ErrorKind::Validation, "config: " + key + " is not a number: '" + v + "'");
    return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) fail(ErrorKind::Validation, "config: " + key + " is not an integer: '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(ErrorKind::Validation, "config: " + key + " is not a boolean: '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Presets

/// Platform constants of the reference setup: f = 30 mm, F = 1.8,
/// P = 10 um, L = 90 mm, 16 x 16 array, 1000 fps.
inline Scene base_scene() {
    Scene s;
    s.camera = CameraModel{};
    s.camera.distortion = {-2.8335, 2.1234, 0.0};
    s.geometry = LinkGeometry{};
    s.flags = ChannelFlags{};
    s.noise = NoiseModel{};
    // Two overlapping spots stay below saturation; three clip.
    s.flags.gain = 0.45;
    // Spots are brighter than the background, so only the inward gradient
    // direction carries circle evidence.
    s.decode.hough.two_sided = false;
    s.decode.hough.grad_threshold = 0.05;
    s.decode.hough.vote_threshold = 0.04;
    return s;
}

/// Default platform: 25 px spacing at 6 m, blur diameter from the model.
inline Scene preset_table2() {
    Scene s = base_scene();
    s.name = "table2";
    s.geometry.ref_spacing_px = 25.0;
    s.geometry.ref_distance_m = 6.0;
    s.delta_px = 25.0;
    s.flags.apply_vignetting = true;
    const double c_model = blur_diameter(s.camera, s.geometry.focus_m, s.geometry.comm_m, s.calibration.k_corr).expected_px;
    s.spot_c_px = c_model + s.flags.feather_px;
    return s;
}

/// ISI-degree scenes: spacing, distance, apparent (measured) diameter and
/// expected diameter. The rendered diameter adds the feather width so the
/// apparent edge lands at C_data.
inline Scene preset_degree(int degree) {
    struct Row {
        double delta, comm, c_data, c_exp;
    };
    static constexpr Row rows[] = {{33, 4, 42, 43}, {22, 6, 52, 54}, {15, 8, 62, 60}};
    if (degree < 1 || degree > 3) fail(ErrorKind::Validation, "preset: degree must be 1, 2 or 3");
    const Row& r = rows[degree - 1];
    Scene s = base_scene();
    s.name = "degree" + std::to_string(degree);
    s.geometry.ref_spacing_px = 22.0;
    s.geometry.ref_distance_m = 6.0;
    s.geometry.comm_m = r.comm;
    s.delta_px = r.delta;
    s.spot_c_px = r.c_data + s.flags.feather_px;
    s.calibration.pilot_c_px = r.c_exp;
    s.calibration.c_exp_override = r.c_exp;
    if (degree == 3) s.calibration.pilot_stride = 5;  // stride 3 would space pilots closer than C
    return s;
}

inline Scene preset_scene(const std::string& name) {
    if (name == "table2") return preset_table2();
    if (name == "degree1") return preset_degree(1);
    if (name == "degree2") return preset_degree(2);
    if (name == "degree3") return preset_degree(3);
    fail(ErrorKind::Validation, "unknown preset: " + name);
}

struct AppConfig {
    Scene scene = preset_table2();
    int pgm_bits = 16;
    std::string preset = "table2";
};

/// Applies `kv` on top of `base`. Unknown keys are rejected.
inline AppConfig apply_config(AppConfig cfg, const KeyValues& kv) {
    Scene& s = cfg.scene;
    for (const auto& [key, v] : kv) {
        auto d = [&] { return parse_double(key, v); };
        auto i = [&] { return static_cast<int>(parse_int(key, v)); };
        auto b = [&] { return parse_bool(key, v); };
        if (key == "camera.f_mm") s.camera.focal_mm = d();
        else if (key == "camera.f_number") s.camera.f_number = d();
        else if (key == "camera.pixel_pitch_um") s.camera.pixel_pitch_um = d();
        else if (key == "camera.lens_length_mm") s.camera.lens_length_mm = d();
        else if (key == "camera.cx") s.camera.cx = d();
        else if (key == "camera.cy") s.camera.cy = d();
        else if (key == "camera.width") s.camera.image_w = i();
        else if (key == "camera.height") s.camera.image_h = i();
        else if (key == "camera.k1") s.camera.distortion.k1 = d();
        else if (key == "camera.k2") s.camera.distortion.k2 = d();
        else if (key == "camera.k3") s.camera.distortion.k3 = d();
        else if (key == "geometry.n") s.geometry.n = i();
        else if (key == "geometry.pitch_m") s.geometry.pitch_m = d();
        else if (key == "geometry.focus_m") s.geometry.focus_m = d();
        else if (key == "geometry.comm_m") s.geometry.comm_m = d();
        else if (key == "geometry.ref_spacing_px") s.geometry.ref_spacing_px = d();
        else if (key == "geometry.ref_distance_m") s.geometry.ref_distance_m = d();
        else if (key == "scene.delta_px") s.delta_px = d();
        else if (key == "scene.spot_c_px") s.spot_c_px = d();
        else if (key == "scene.center_x") s.grid_center.x = d();
        else if (key == "scene.center_y") s.grid_center.y = d();
        else if (key == "channel.sigma") s.noise.sigma = d();
        else if (key == "channel.seed") s.noise.seed = static_cast<std::uint64_t>(parse_int(key, v));
        else if (key == "channel.saturation") s.noise.saturation = d();
        else if (key == "channel.gain") s.flags.gain = d();
        else if (key == "channel.distortion") s.flags.apply_distortion = b();
        else if (key == "channel.vignetting") s.flags.apply_vignetting = b();
        else if (key == "channel.psf_profile") s.flags.psf_profile = parse_psf_profile(v);
        else if (key == "channel.feather_px") s.flags.feather_px = d();
        else if (key == "channel.pgm_bits") cfg.pgm_bits = i();
        else if (key == "calibrate.model_order") s.calibration.model_order = i();
        else if (key == "calibrate.bounded") s.calibration.bounded = b();
        else if (key == "calibrate.refine_iters") s.calibration.refine_iters = i();
        else if (key == "calibrate.pilot_stride") s.calibration.pilot_stride = i();
        else if (key == "calibrate.k_corr") s.calibration.k_corr = d();
        else if (key == "calibrate.pilot_c_px") s.calibration.pilot_c_px = d();
        else if (key == "calibrate.pilot_band") s.calibration.pilot_band = d();
        else if (key == "calibrate.c_exp_px") s.calibration.c_exp_override = d();
        else if (key == "calibrate.alpha_from_geometry") s.calibration.alpha_from_geometry = b();
        else if (key == "decode.epsilon") s.decode.epsilon = d();
        else if (key == "decode.theta") s.decode.theta = d();
        else if (key == "decode.gamma") s.decode.gamma = d();
        else if (key == "decode.sector_threshold") s.decode.sector_threshold = d();
        else if (key == "decode.center_dist_frac") s.decode.center_dist_frac = d();
        else if (key == "decode.refine_iters") s.decode.refine_iters = i();
        else if (key == "hough.grad_threshold") s.decode.hough.grad_threshold = d();
        else if (key == "hough.two_sided") s.decode.hough.two_sided = b();
        else if (key == "hough.vote_threshold") s.decode.hough.vote_threshold = d();
        else if (key == "hough.radius_step") s.decode.hough.radius_step = d();
        else if (key == "calibrate.grad_threshold") s.calibration.hough.grad_threshold = d();
        else if (key == "calibrate.vote_threshold") s.calibration.hough.vote_threshold = d();
        else fail(ErrorKind::Validation, "config: unknown key '" + key + "'");
    }
    if (cfg.pgm_bits != 8 && cfg.pgm_bits != 16) fail(ErrorKind::Validation, "config: channel.pgm_bits must be 8 or 16");
    s.validate();
    return cfg;
}

inline AppConfig load_config(const std::string& preset, const std::string& text) {
    AppConfig cfg;
    KeyValues kv = parse_key_values(text);
    std::string name = preset;
    if (auto it = kv.find("preset"); it != kv.end()) {
        name = it->second;
        kv.erase(it);
    }
    cfg.preset = name;
    cfg.scene = preset_scene(name);
    return apply_config(std::move(cfg), kv);
}

inline SweepSpec parse_sweep_spec(std::string_view text) {
    SweepSpec spec;
    for (const auto& [key, v] : parse_key_values(text)) {
        const std::string k = key.rfind("sweep.", 0) == 0 ? key.substr(6) : key;
        if (k == "degrees") spec.isi_degrees = split_list(v);
        else if (k == "ratios" || k == "epsilons") {
            std::vector<double> vals;
            for (const auto& item : split_list(v)) vals.push_back(parse_double(key, item));
            (k == "ratios" ? spec.lighting_ratios : spec.epsilons) = vals;
        } else if (k == "decoders" || k == "decoder") {
            spec.decoders.clear();
            for (const auto& item : split_list(v)) spec.decoders.push_back(parse_decoder(item));
        } else if (k == "frames_per_point") spec.frames_per_point = static_cast<int>(parse_int(key, v));
        else if (k == "seed") spec.seed = static_cast<std::uint64_t>(parse_int(key, v));
        else if (k == "max_overlaps") spec.max_overlaps = static_cast<int>(parse_int(key, v));
        else if (k == "frame_rate") spec.frame_rate = parse_double(key, v);
        else if (k == "sigma") spec.sigma = parse_double(key, v);
        else fail(ErrorKind::Validation, "sweep spec: unknown key '" + key + "'");
    }
    spec.validate();
    return spec;
}

}  // namespace ledvlc
